#include <cstdio>

#include "udef/game.hpp"

int main() {
  // placeholder; subcommands land once the pipeline modules are in
  std::puts("udef cli");
  return 0;
}
