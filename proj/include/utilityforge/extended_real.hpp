#pragma once

#include <cmath>
#include <compare>
#include <string>

#include "utilityforge/error.hpp"

namespace utilityforge {

/// A real number or one of +-infinity, tagged explicitly.
class ExtendedReal {
public:
    enum class Kind { finite, plus_infinity, minus_infinity };

    constexpr ExtendedReal() = default;
    constexpr explicit ExtendedReal(double v)
        : kind_(Kind::finite), value_(v)
    {}

    static constexpr ExtendedReal plus_infinity() { return ExtendedReal(Kind::plus_infinity); }
    static constexpr ExtendedReal minus_infinity() { return ExtendedReal(Kind::minus_infinity); }

    /// Maps IEEE infinities onto the tagged variants.
    static ExtendedReal from_double(double v)
    {
        if (std::isnan(v))
            fail(ErrorCode::NonFinite, "NaN is not an extended real");
        if (std::isinf(v))
            return v > 0 ? plus_infinity() : minus_infinity();
        return ExtendedReal(v);
    }

    [[nodiscard]] constexpr Kind kind() const noexcept { return kind_; }
    [[nodiscard]] constexpr bool is_finite() const noexcept { return kind_ == Kind::finite; }
    [[nodiscard]] constexpr bool is_plus_infinity() const noexcept { return kind_ == Kind::plus_infinity; }
    [[nodiscard]] constexpr bool is_minus_infinity() const noexcept { return kind_ == Kind::minus_infinity; }

    /// The finite value; throws for the infinite variants.
    [[nodiscard]] double value() const
    {
        if (kind_ != Kind::finite)
            fail(ErrorCode::NonFinite, "extended real is infinite");
        return value_;
    }

    /// IEEE view, for arithmetic where infinities propagate correctly.
    [[nodiscard]] double to_double() const noexcept
    {
        switch (kind_) {
        case Kind::plus_infinity: return HUGE_VAL;
        case Kind::minus_infinity: return -HUGE_VAL;
        case Kind::finite: break;
        }
        return value_;
    }

    [[nodiscard]] std::string to_string() const
    {
        switch (kind_) {
        case Kind::plus_infinity: return "+inf";
        case Kind::minus_infinity: return "-inf";
        case Kind::finite: break;
        }
        return std::to_string(value_);
    }

    friend bool operator==(const ExtendedReal& a, const ExtendedReal& b) noexcept
    {
        return a.kind_ == b.kind_ && (a.kind_ != Kind::finite || a.value_ == b.value_);
    }
    friend std::partial_ordering operator<=>(const ExtendedReal& a, const ExtendedReal& b) noexcept
    {
        return a.to_double() <=> b.to_double();
    }

private:
    constexpr explicit ExtendedReal(Kind k)
        : kind_(k)
    {}

    Kind kind_ = Kind::finite;
    double value_ = 0.0;
};

} // namespace utilityforge
