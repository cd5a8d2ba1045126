#pragma once

#include "utilityforge/error.hpp"
#include "utilityforge/numerics.hpp"
#include "utilityforge/extended_real.hpp"
#include "utilityforge/distributions.hpp"
#include "utilityforge/market.hpp"
#include "utilityforge/efficiency.hpp"
#include "utilityforge/utility.hpp"
#include "utilityforge/risk_aversion.hpp"
#include "utilityforge/discrete.hpp"
