#include <iostream>

#include "hookroute/cli.hpp"

int main(int argc, char** argv)
{
    return hookroute::run_cli(argc, argv, std::cout, std::cerr);
}
