#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lf {

// Raw bytes with 90/5/5 train/dev/test split offsets.
struct Corpus {
  std::vector<std::uint8_t> bytes;
  std::size_t train_end = 0;
  std::size_t dev_end = 0;
  std::size_t distinct_bytes = 0;

  std::vector<std::uint8_t> train() const {
    return {bytes.begin(), bytes.begin() + train_end};
  }
  std::vector<std::uint8_t> dev() const {
    return {bytes.begin() + train_end, bytes.begin() + dev_end};
  }
  std::vector<std::uint8_t> test() const { return {bytes.begin() + dev_end, bytes.end()}; }
};

// Reads the file byte-exact, no transcoding.
Corpus load_corpus(const std::string& path);

Corpus corpus_from_bytes(std::vector<std::uint8_t> bytes);

}  // namespace lf
