#include "krondpp/synth.hpp"

#include <sstream>

namespace krondpp {

KronKernel synth_kernel(std::span<const Index> dims, RngStream& rng) {
  if (dims.empty()) throw DimensionError("synth_kernel: at least one dimension required");
  std::vector<SpdMatrix> factors;
  factors.reserve(dims.size());
  for (Index d : dims) factors.push_back(SpdMatrix::checked(random_gram_matrix(d, rng)));
  return KronKernel(std::move(factors));
}

std::vector<Subset> synth_subsets(const KronKernel& k, Index count, Index min_size,
                                  Index max_size, RngStream& rng) {
  if (count < 0) throw DimensionError("synth_subsets: count must be non-negative");
  if (min_size < 0 || max_size < min_size || max_size > k.dim())
    throw DimensionError("synth_subsets: invalid size window");
  constexpr int kMaxRejections = 10000;
  std::vector<Subset> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    int rejections = 0;
    for (;;) {
      SampleReport report = sample_kron(k, rng);
      const Index size = static_cast<Index>(report.subset.size());
      if (size >= min_size && size <= max_size) {
        out.push_back(std::move(report.subset));
        break;
      }
      if (++rejections >= kMaxRejections) {
        std::ostringstream msg;
        msg << "synth_subsets: sample " << i << " exceeded " << kMaxRejections
            << " rejections; the size window [" << min_size << ", " << max_size
            << "] is too unlikely under this kernel";
        throw NumericalError(msg.str());
      }
    }
  }
  return out;
}

}  // namespace krondpp
