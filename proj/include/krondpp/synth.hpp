#pragma once

#include "krondpp/dpp_model.hpp"
#include "krondpp/learning.hpp"
#include "krondpp/rng.hpp"
#include "krondpp/sampling.hpp"

#include <span>
#include <vector>

namespace krondpp {

// Random factored ground-truth kernel: one random Gram factor per requested
// dimension, drawn from the stream in order.
KronKernel synth_kernel(std::span<const Index> dims, RngStream& rng);

// Draws `count` exact samples from the kernel, rejecting any draw whose size
// falls outside [min_size, max_size] and redrawing. Throws NumericalError
// when a single sample exceeds the rejection budget (the window is then too
// unlikely under the kernel).
std::vector<Subset> synth_subsets(const KronKernel& k, Index count, Index min_size,
                                  Index max_size, RngStream& rng);

}  // namespace krondpp
