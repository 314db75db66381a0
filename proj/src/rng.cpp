#include "conprom/rng.hpp"

#include <numeric>
#include <sstream>

#include "conprom/error.hpp"

namespace conprom {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) raise(ErrorKind::InvalidArgument, "Rng::below: n must be positive");
  // Rejection sampling: discard draws below 2^64 mod n.
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    std::uint64_t x = next_u64();
    if (x >= threshold) return x % n;
  }
}

std::vector<std::size_t> Rng::sample_indices(std::size_t n, std::size_t k) {
  if (k > n) k = n;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates: the first k entries form the sample.
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

std::string Rng::save_state() const {
  std::ostringstream out;
  out << gen_;
  return out.str();
}

void Rng::restore_state(const std::string& text) {
  std::istringstream in(text);
  in >> gen_;
  if (in.fail()) raise(ErrorKind::Parse, "Rng::restore_state: malformed state string");
}

}  // namespace conprom
