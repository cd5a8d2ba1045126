#include "utilityforge/cli.hpp"

int main(int argc, char** argv)
{
    return utilityforge::cli::main(argc, argv);
}
