#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace concord {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IndexVector = Eigen::VectorXi;
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Sparsity pattern of the instrument x source observation matrix.
/// `by_instrument[i]` lists the sources seen by instrument i (J_i),
/// `by_source[j]` the instruments that saw source j (I_j). Both lists are
/// sorted ascending.
struct ObservationIndex {
  std::vector<std::vector<int>> by_instrument;
  std::vector<std::vector<int>> by_source;

  static ObservationIndex from_mask(const Mask& mask);

  IndexVector instrument_counts() const;  // |J_i|
  IndexVector source_counts() const;      // |I_j|
  int n_observed() const;
};

/// Observed counts c_ij and known factors T_ij for N instruments (rows) and
/// M sources (columns). Cells with mask false are unobserved; their count
/// and factor entries are ignored and stored as NaN.
///
/// Construction validates everything the model needs: non-negative counts,
/// positive factors, and at least one observation per source (without it
/// the posterior is improper). Zero counts are allowed here, but the log
/// data y_ij = log c_ij - log T_ij only exists once they are adjusted; see
/// adjust_zero_counts.
class Dataset {
 public:
  Dataset() = default;

  static Dataset from_counts(const Matrix& counts, const Matrix& factors, const Mask& mask,
                             std::vector<std::string> instrument_names = {},
                             std::vector<std::string> source_names = {});

  /// Complete-mask convenience with unit factors.
  static Dataset from_counts(const Matrix& counts);

  /// Build directly from log data; counts are set to exp(y) and factors to
  /// one, but y is kept exactly as given.
  static Dataset from_log_data(const Matrix& y, const Mask& mask);
  static Dataset from_log_data(const Matrix& y);

  int n_instruments() const { return static_cast<int>(counts_.rows()); }
  int n_sources() const { return static_cast<int>(counts_.cols()); }

  const Matrix& counts() const { return counts_; }
  const Matrix& factors() const { return factors_; }
  const Mask& mask() const { return mask_; }
  const ObservationIndex& index() const { return index_; }
  bool observed(int i, int j) const { return mask_(i, j); }
  bool complete() const { return mask_.all(); }
  bool has_zero_counts() const { return zero_cells_ > 0; }

  /// y_ij on observed cells, NaN elsewhere. Throws ValidationError when the
  /// dataset still contains zero counts.
  const Matrix& log_data() const;

  const std::vector<std::string>& instrument_names() const { return instrument_names_; }
  const std::vector<std::string>& source_names() const { return source_names_; }

 private:
  Matrix counts_;
  Matrix factors_;
  Mask mask_;
  ObservationIndex index_;
  Matrix y_;
  int zero_cells_ = 0;
  std::vector<std::string> instrument_names_;
  std::vector<std::string> source_names_;

  void finish(std::vector<std::string> instrument_names, std::vector<std::string> source_names);
};

/// Expert inputs. b_i, tau_i^2 describe the Normal prior on B_i; alpha and
/// beta the inverse-Gamma prior on each sigma_i^2. kappa and nu parametrize
/// the log-t model; when absent they follow the log-Normal correspondence
/// nu = 2 alpha, kappa^2 = 2 beta.
///
/// tau2 may be +infinity (no prior information on B_i).
struct Priors {
  Vector b;
  Vector tau2;
  double alpha = 1.0;
  double beta = 1.0;
  std::optional<double> kappa;
  std::optional<double> nu;

  static Priors uniform(int n_instruments, double b, double tau, double alpha, double beta);

  void validate(int n_instruments) const;
  double kappa_value() const;
  double nu_value() const;
};

/// One point (B, G, sigma^2 [, xi]) of parameter space. xi, when present, is
/// N x M; only observed cells are meaningful.
struct ParamState {
  Vector B;
  Vector G;
  Vector sigma2;
  std::optional<Matrix> xi;

  Vector areas() const { return B.array().exp(); }   // A_i
  Vector fluxes() const { return G.array().exp(); }  // F_j

  void validate(const Dataset& data) const;
};

}  // namespace concord
