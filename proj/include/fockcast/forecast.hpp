#pragma once

#include "fockcast/dynamics.hpp"
#include "fockcast/fock.hpp"
#include "fockcast/generator.hpp"
#include "fockcast/semigroup.hpp"

#include <Eigen/Dense>

#include <complex>
#include <string>
#include <vector>

namespace fockcast {

/// |pred - truth| / |truth| under the sampling measure.
/// Throws NumericalError "zero-truth-norm" if truth vanishes.
double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

/// Correlation of mean-removed anomalies, in [-1, 1].
/// Throws NumericalError "zero-anomaly-norm" if either anomaly vanishes.
double anomaly_correlation(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

/// Baseline forecast sum_j C_j e^{i omega_j t} zeta_j(x) over the selected modes.
class ClassicalPredictor {
public:
    ClassicalPredictor() = default;
    /// zeta_j = sum_k b_k lambda_{k,tau}^{1/2} phi_k and C_j = <zeta_j, f>.
    ClassicalPredictor(const KoopmanEigensystem& eigensystem, const SemigroupBasis& basis, double tau,
                       const Eigen::VectorXd& f, const std::vector<Eigen::Index>& modes);

    /// Coefficients C_j for slots -d..d.
    const Eigen::VectorXcd& coefficients() const { return coeffs_; }
    const Eigen::VectorXd& omegas() const { return omegas_; }

    std::complex<double> evaluate_complex(const Eigen::VectorXd& phi, double t) const;
    double evaluate(const Eigen::VectorXd& phi, double t) const { return evaluate_complex(phi, t).real(); }
    /// Predictions at many points from an M x l matrix of basis values.
    Eigen::VectorXcd evaluate_rows(const Eigen::MatrixXd& phi, double t) const;

private:
    Eigen::MatrixXcd zeta_;  // l x (2d + 1)
    Eigen::VectorXcd coeffs_;
    Eigen::VectorXd omegas_;
};

double predict_classical(const ClassicalPredictor& predictor, const NystromExtension& nystrom,
                         const Eigen::VectorXd& x, double t);

/// N x T matrix f(Phi^t(x_n)).
Eigen::MatrixXd truth_values(const TrajectoryDataset& dataset, const std::vector<double>& times, double h);

/// Skill scores per lead time.
struct ForecastReport {
    std::vector<double> times;
    std::vector<double> rmse_fock;
    std::vector<double> rmse_classical;
    std::vector<double> ac_fock;
    std::vector<double> ac_classical;
    /// N x T predictions.
    Eigen::MatrixXd pred_fock;
    Eigen::MatrixXd pred_classical;
};

/// Both forecasts at a set of points for every lead time.
struct SamplePredictions {
    /// M x T.
    Eigen::MatrixXd fock;
    Eigen::MatrixXd classical;
    /// max |Im(num/den)| / |num/den| over all Fock evaluations.
    double max_imag_fock = 0.0;
    /// max |Im| of the classical sum.
    double max_imag_classical = 0.0;
};

/// Evaluates both predictors at points given by an M x l matrix of basis values.
SamplePredictions predict_samples(const FockPredictor& fock, const ClassicalPredictor& classical,
                                  const Eigen::MatrixXd& phi, const std::vector<double>& times, PredictorPath path);

/// Predicts at every training sample for every time and scores against truth.
ForecastReport evaluate(const FockPredictor& fock, const ClassicalPredictor& classical, const Eigen::MatrixXd& phi,
                        const Eigen::MatrixXd& truth, const std::vector<double>& times, PredictorPath path);

/// Scores precomputed predictions.
ForecastReport score(const Eigen::MatrixXd& pred_fock, const Eigen::MatrixXd& pred_classical,
                     const Eigen::MatrixXd& truth, const std::vector<double>& times);

/// CSV with header "t,rmse_fock,rmse_cl,ac_fock,ac_cl", shortest round-trip numbers.
std::string report_csv(const ForecastReport& report);

/// Shortest decimal string that reads back to the same double.
std::string format_double(double value);

}  // namespace fockcast
