#pragma once

#include "krondpp/dpp_model.hpp"
#include "krondpp/learning.hpp"
#include "krondpp/partitioning.hpp"
#include "krondpp/types.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>

namespace krondpp {

// Shortest decimal form that parses back to the identical double
// (std::to_chars), so matrix round-trips are bit-exact.
std::string format_double(double v);
// Strict double parse of an entire token (std::from_chars).
double parse_double(const std::string& token, const std::string& context);

// Comma-separated matrix with one row per line, entries in format_double
// form. Loading requires a rectangular layout.
void save_matrix_csv(const Matrix& m, const std::filesystem::path& path);
Matrix load_matrix_csv(const std::filesystem::path& path);

// Kernel manifest: JSON {"version": 1, "factors": [{"rows": n, "path": p}]}
// with factor CSV paths resolved relative to the manifest directory.
// save_kernel writes the factors next to the manifest as
// "<stem>.factor<k>.csv". Loading validates version, factor shapes against
// the declared rows, and positive definiteness of every factor.
void save_kernel(const KronKernel& k, const std::filesystem::path& manifest_path);
KronKernel load_kernel(const std::filesystem::path& manifest_path);

// Subsets file: one subset per line as whitespace-separated indices; '#'
// starts a comment; blank lines are skipped. The format cannot represent
// the empty subset. Loading rejects duplicates, out-of-range indices, and
// malformed tokens with line-numbered errors. The overload without a ground
// size infers it as (largest index + 1).
void save_subsets(std::span<const Subset> subsets, const std::filesystem::path& path,
                  std::optional<std::size_t> empty_count = std::nullopt);
TrainingSet load_subsets(const std::filesystem::path& path, Index ground_size);
TrainingSet load_subsets(const std::filesystem::path& path);

// Fit trace: "iter,seconds,loglik" header then one row per iteration with
// cumulative seconds (%.6f) and shortest-round-trip log-likelihood.
void save_trace_csv(const FitHistory& history, const std::filesystem::path& path);

// Partition plan JSON: {"z": z, "groups": [{"subsets": [...], "union": [...]}]}.
void save_partition_json(const PartitionPlan& plan, const std::filesystem::path& path);
PartitionPlan load_partition_json(const std::filesystem::path& path);

}  // namespace krondpp
