#include "metarisk/random.hpp"

#include <vector>

namespace metarisk {

Rng::Rng(std::uint64_t seed, Stream stream, std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint32_t> words;
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  push(static_cast<std::uint64_t>(stream));
  for (auto p : path) push(p);
  std::seed_seq seq(words.begin(), words.end());
  engine_.seed(seq);
}

}  // namespace metarisk
