#include <iostream>
#include <string>
#include <vector>

#include "hiddenscan/cli.hpp"

int main(int argc, char** argv, char** envp) {
  std::vector<std::string> args(argv + 1, argv + argc);
  // The block handed to main, before anything in-process could edit it.
  std::vector<std::string> env;
  for (char** e = envp; e && *e; ++e) env.emplace_back(*e);
  return hiddenscan::run(args, std::cout, std::cerr, std::move(env));
}
