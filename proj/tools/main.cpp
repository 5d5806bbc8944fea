#include <string>
#include <vector>

#include "mtwae/cli.hpp"

int main(int argc, char** argv) {
  return mtwae::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
