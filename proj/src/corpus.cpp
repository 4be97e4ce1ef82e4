#include "lf/corpus.hpp"

#include <array>
#include <fstream>

#include "lf/error.hpp"

namespace lf {

Corpus corpus_from_bytes(std::vector<std::uint8_t> bytes) {
  if (bytes.empty()) throw DataError("corpus: empty input");
  Corpus c;
  c.bytes = std::move(bytes);
  c.train_end = c.bytes.size() * 90 / 100;
  c.dev_end = c.bytes.size() * 95 / 100;
  std::array<bool, 256> seen{};
  for (std::uint8_t b : c.bytes) seen[b] = true;
  for (bool s : seen)
    if (s) ++c.distinct_bytes;
  return c;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("corpus: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.empty()) throw DataError("corpus: " + path + " is empty");
  return corpus_from_bytes(std::move(bytes));
}

}  // namespace lf
