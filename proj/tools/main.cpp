#include "cli.hpp"

#include <iostream>

int main(int argc, char **argv)
{
  return fpl::cli::run(argc, argv, std::cout, std::cerr);
}
