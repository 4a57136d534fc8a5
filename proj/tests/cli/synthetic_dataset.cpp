// Writes the synthetic issue corpus as a JSONL dataset: synthetic_dataset OUT [DOCS] [DEVELOPERS]

#include <cstdlib>
#include <iostream>

#include "support/synthetic.hpp"
#include "triage/corpus.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: synthetic_dataset OUT [DOCS] [DEVELOPERS]\n";
    return 1;
  }
  triage::testing::SyntheticOptions opt;
  if (argc > 2) opt.documents = std::strtoul(argv[2], nullptr, 10);
  if (argc > 3) opt.developers = std::strtoul(argv[3], nullptr, 10);
  triage::write_dataset(argv[1], triage::testing::synthetic_corpus(opt));
  return 0;
}
