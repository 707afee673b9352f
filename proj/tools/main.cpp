#include "cli.hpp"

int main(int argc, char** argv) {
  return egrt::cli::dispatch(std::vector<std::string>(argv + 1, argv + argc));
}
