#include "fockcast/forecast.hpp"

#include "fockcast/errors.hpp"
#include "fockcast/parallel.hpp"

#include <charconv>
#include <algorithm>
#include <cmath>

namespace fockcast {
namespace {

using cd = std::complex<double>;

constexpr std::size_t kSampleChunk = 32;

}  // namespace

double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
    if (pred.size() != truth.size()) throw ValidationError("prediction and truth lengths differ");
    const double norm = truth.norm();
    if (!(norm > 0.0)) throw NumericalError("zero-truth-norm", "truth has zero norm");
    return (pred - truth).norm() / norm;
}

double anomaly_correlation(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
    if (pred.size() != truth.size()) throw ValidationError("prediction and truth lengths differ");
    const Eigen::VectorXd a = pred.array() - pred.mean();
    const Eigen::VectorXd b = truth.array() - truth.mean();
    const double na = a.norm();
    const double nb = b.norm();
    if (!(na > 0.0) || !(nb > 0.0)) throw NumericalError("zero-anomaly-norm", "anomaly has zero norm");
    return a.dot(b) / (na * nb);
}

ClassicalPredictor::ClassicalPredictor(const KoopmanEigensystem& eigensystem, const SemigroupBasis& basis, double tau,
                                       const Eigen::VectorXd& f, const std::vector<Eigen::Index>& modes) {
    const Eigen::Index n = basis.phi.rows();
    if (f.size() != n) throw ValidationError("observable does not match basis samples");
    const std::vector<Eigen::Index> cols = slot_columns(eigensystem, modes);
    const auto slots = static_cast<Eigen::Index>(cols.size());
    const Eigen::VectorXcd root = heat_multipliers(basis, tau).cwiseSqrt().cast<cd>();
    zeta_.resize(basis.size(), slots);
    omegas_.resize(slots);
    for (Eigen::Index s = 0; s < slots; ++s) {
        zeta_.col(s) = root.cwiseProduct(eigensystem.zeta_coeffs.col(cols[static_cast<std::size_t>(s)]));
        omegas_[s] = eigensystem.omegas[cols[static_cast<std::size_t>(s)]];
    }
    const Eigen::MatrixXcd samples = basis.phi.cast<cd>() * zeta_;
    coeffs_ = samples.adjoint() * f.cast<cd>() / static_cast<double>(n);
}

std::complex<double> ClassicalPredictor::evaluate_complex(const Eigen::VectorXd& phi, double t) const {
    if (phi.size() != zeta_.rows()) throw ValidationError("basis values have wrong length");
    const Eigen::VectorXcd z = zeta_.transpose() * phi.cast<cd>();
    cd sum = 0.0;
    for (Eigen::Index s = 0; s < z.size(); ++s) sum += coeffs_[s] * std::polar(1.0, omegas_[s] * t) * z[s];
    return sum;
}

Eigen::VectorXcd ClassicalPredictor::evaluate_rows(const Eigen::MatrixXd& phi, double t) const {
    if (phi.cols() != zeta_.rows()) throw ValidationError("basis values have wrong width");
    Eigen::VectorXcd phase(coeffs_.size());
    for (Eigen::Index s = 0; s < phase.size(); ++s) phase[s] = coeffs_[s] * std::polar(1.0, omegas_[s] * t);
    return phi.cast<cd>() * (zeta_ * phase);
}

double predict_classical(const ClassicalPredictor& predictor, const NystromExtension& nystrom,
                         const Eigen::VectorXd& x, double t) {
    return predictor.evaluate(nystrom.phi(x), t);
}

Eigen::MatrixXd truth_values(const TrajectoryDataset& dataset, const std::vector<double>& times, double h) {
    const Eigen::Index n = dataset.size();
    const auto nt = static_cast<Eigen::Index>(times.size());
    Eigen::MatrixXd truth(n, nt);
    parallel_for(static_cast<std::size_t>(n), kSampleChunk, [&](std::size_t begin, std::size_t end) {
        for (auto i = static_cast<Eigen::Index>(begin); i < static_cast<Eigen::Index>(end); ++i) {
            const Eigen::VectorXd x0 = dataset.state(i);
            for (Eigen::Index k = 0; k < nt; ++k)
                truth(i, k) = dataset.observable(integrate_flow(dataset.system, x0, times[static_cast<std::size_t>(k)], h));
        }
    });
    return truth;
}

ForecastReport score(const Eigen::MatrixXd& pred_fock, const Eigen::MatrixXd& pred_classical,
                     const Eigen::MatrixXd& truth, const std::vector<double>& times) {
    const auto nt = static_cast<Eigen::Index>(times.size());
    if (truth.cols() != nt || pred_fock.cols() != nt || pred_classical.cols() != nt)
        throw ValidationError("prediction matrices do not match the time grid");
    ForecastReport r;
    r.times = times;
    for (Eigen::Index k = 0; k < nt; ++k) {
        r.rmse_fock.push_back(rmse(pred_fock.col(k), truth.col(k)));
        r.rmse_classical.push_back(rmse(pred_classical.col(k), truth.col(k)));
        r.ac_fock.push_back(anomaly_correlation(pred_fock.col(k), truth.col(k)));
        r.ac_classical.push_back(anomaly_correlation(pred_classical.col(k), truth.col(k)));
    }
    r.pred_fock = pred_fock;
    r.pred_classical = pred_classical;
    return r;
}

SamplePredictions predict_samples(const FockPredictor& fock, const ClassicalPredictor& classical,
                                  const Eigen::MatrixXd& phi, const std::vector<double>& times, PredictorPath path) {
    const Eigen::Index n = phi.rows();
    const auto nt = static_cast<Eigen::Index>(times.size());
    const Eigen::MatrixXcd gammas = fock.gamma().at(phi);
    SamplePredictions out;
    out.fock.resize(n, nt);
    out.classical.resize(n, nt);
    Eigen::MatrixXd imag_fock(n, nt);
    for (Eigen::Index k = 0; k < nt; ++k) {
        const double t = times[static_cast<std::size_t>(k)];
        const Eigen::VectorXcd cl = classical.evaluate_rows(phi, t);
        out.classical.col(k) = cl.real();
        out.max_imag_classical = std::max(out.max_imag_classical, cl.imag().cwiseAbs().maxCoeff());
        parallel_for(static_cast<std::size_t>(n), kSampleChunk, [&](std::size_t begin, std::size_t end) {
            for (auto i = static_cast<Eigen::Index>(begin); i < static_cast<Eigen::Index>(end); ++i) {
                const FockPredictor::Value v = fock.evaluate(gammas.row(i).transpose(), t, path);
                out.fock(i, k) = v.value;
                const cd ratio = v.num / v.den;
                imag_fock(i, k) = std::abs(ratio.imag()) / std::max(std::abs(ratio), 1e-300);
            }
        });
    }
    out.max_imag_fock = n > 0 && nt > 0 ? imag_fock.maxCoeff() : 0.0;
    return out;
}

ForecastReport evaluate(const FockPredictor& fock, const ClassicalPredictor& classical, const Eigen::MatrixXd& phi,
                        const Eigen::MatrixXd& truth, const std::vector<double>& times, PredictorPath path) {
    if (truth.rows() != phi.rows()) throw ValidationError("truth does not match evaluation samples");
    const SamplePredictions p = predict_samples(fock, classical, phi, times, path);
    return score(p.fock, p.classical, truth, times);
}

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

std::string report_csv(const ForecastReport& report) {
    std::string out = "t,rmse_fock,rmse_cl,ac_fock,ac_cl\n";
    for (std::size_t k = 0; k < report.times.size(); ++k) {
        out += format_double(report.times[k]) + ',' + format_double(report.rmse_fock[k]) + ',' +
               format_double(report.rmse_classical[k]) + ',' + format_double(report.ac_fock[k]) + ',' +
               format_double(report.ac_classical[k]) + '\n';
    }
    return out;
}

}  // namespace fockcast
