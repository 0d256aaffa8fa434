#include <string>
#include <vector>

#include "lowent/cli.hpp"

int main(int argc, char** argv) {
  return lowent::cli_dispatch(std::vector<std::string>(argv + 1, argv + argc));
}
