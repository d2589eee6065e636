// Placeholder CLI; subcommands land with the experiment layer.
#include <cstdio>

int main() {
  std::puts("dynrnn: experiment CLI (under construction)");
  return 0;
}
