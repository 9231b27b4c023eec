// Writes the small synthetic corpus used by the tests and the README demo.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "forge/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"forge-synth: write the synthetic 4-image corpus"};
  std::string out = "data/synthetic";
  std::uint64_t seed = 7;
  app.add_option("--out", out, "output directory");
  app.add_option("--seed", seed, "corpus seed");
  CLI11_PARSE(app, argc, argv);
  try {
    std::cout << forge::synth::write_corpus(out, seed).string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "forge-synth: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
