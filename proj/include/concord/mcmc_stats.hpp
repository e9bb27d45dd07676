#pragma once

#include <vector>

namespace concord {

/// Split-R-hat: each chain is cut in half and the classic potential scale
/// reduction factor is computed over the 2m half-chains. Returns 1 for
/// constant draws.
double split_rhat(const std::vector<std::vector<double>>& chains);

/// Multi-chain effective sample size. Autocorrelations are combined across
/// chains and truncated with Geyer's initial monotone sequence rule. The
/// result never exceeds the total number of draws.
double effective_sample_size(const std::vector<std::vector<double>>& chains);

}  // namespace concord
