#include <cmath>
#include <numeric>

#include "selex/ccmle.hpp"
#include "selex/errors.hpp"

namespace selex {

bool MonotoneCone::contains(std::span<const double> mu) const {
  if (mu.size() != p) return false;
  for (std::size_t i = 1; i < mu.size(); ++i)
    if (mu[i - 1] < mu[i]) return false;
  return true;
}

std::vector<double> project_monotone(std::span<const double> v) {
  struct Block {
    double sum;
    std::size_t count;
    double mean() const { return sum / static_cast<double>(count); }
  };

  std::vector<Block> blocks;
  blocks.reserve(v.size());
  for (double value : v) {
    if (!std::isfinite(value)) throw InvalidArgument("project_monotone: non-finite entry");
    blocks.push_back({value, 1});
    // nonincreasing target: a later block may not exceed an earlier one
    while (blocks.size() >= 2 && blocks[blocks.size() - 2].mean() < blocks.back().mean()) {
      const Block last = blocks.back();
      blocks.pop_back();
      blocks.back().sum += last.sum;
      blocks.back().count += last.count;
    }
  }

  std::vector<double> out;
  out.reserve(v.size());
  for (const Block& b : blocks) out.insert(out.end(), b.count, b.mean());
  return out;
}

}  // namespace selex
