#include "ndm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ndm {

namespace {

// log kernel weights per item, with hard restriction for sigma = 0 levels
std::vector<double> log_weights(const OracleIndex& idx, int l, const Eigen::VectorXd& z_t,
                                int t, const std::vector<Eigen::VectorXd>* cond) {
    const int n = idx.items();
    const Eigen::MatrixXd& zl = idx.latents[l];
    const double a = idx.schedule.alpha[t];
    const double b = idx.schedule.beta[t];

    std::vector<double> lw(n);
    for (int i = 0; i < n; ++i) {
        lw[i] = -(z_t - a * zl.row(i).transpose()).squaredNorm() / (2.0 * b * b);
    }
    if (cond == nullptr) return lw;

    if (static_cast<int>(cond->size()) != idx.L - l) {
        throw std::invalid_argument("oracle: expected one condition per level above l");
    }
    for (int m = l + 1; m <= idx.L; ++m) {
        const Eigen::VectorXd& cm = (*cond)[m - l - 1];
        const Eigen::MatrixXd& zm = idx.latents[m];
        if (cm.size() != zm.cols()) {
            throw std::invalid_argument("oracle: condition dimension mismatch");
        }
        const double sm = idx.sigma[m];
        if (sm == 0.0) {
            bool any = false;
            for (int i = 0; i < n; ++i) {
                const double err = (cm - zm.row(i).transpose()).cwiseAbs().maxCoeff();
                if (err <= 1e-9) {
                    any = true;
                } else {
                    lw[i] = -std::numeric_limits<double>::infinity();
                }
            }
            if (!any) {
                throw std::invalid_argument(
                    "oracle: sigma = 0 condition matches no dataset item");
            }
        } else {
            for (int i = 0; i < n; ++i) {
                lw[i] += -(cm - zm.row(i).transpose()).squaredNorm() / (2.0 * sm * sm);
            }
        }
    }
    return lw;
}

}  // namespace

Eigen::VectorXd oracle_denoiser(const OracleIndex& idx, int l, const Eigen::VectorXd& z_t,
                                int t, const std::vector<Eigen::VectorXd>* cond) {
    if (l < 1 || l > idx.L) throw std::invalid_argument("oracle: level out of range");
    if (t < 1 || t > idx.schedule.T) throw std::invalid_argument("oracle: t out of range");
    if (idx.items() == 0) throw std::invalid_argument("oracle: empty index");
    if (z_t.size() != idx.latents[l].cols()) {
        throw std::invalid_argument("oracle: latent dimension mismatch");
    }

    const std::vector<double> lw = log_weights(idx, l, z_t, t, cond);
    const double mx = *std::max_element(lw.begin(), lw.end());

    Eigen::VectorXd acc = Eigen::VectorXd::Zero(z_t.size());
    double total = 0.0;
    for (int i = 0; i < idx.items(); ++i) {
        const double w = std::exp(lw[i] - mx);
        acc += w * idx.latents[l].row(i).transpose();
        total += w;
    }
    return acc / total;
}

Eigen::VectorXd oracle_eps(const OracleIndex& idx, int l, const Eigen::VectorXd& z_t,
                           int t, const std::vector<Eigen::VectorXd>* cond) {
    const Eigen::VectorXd d = oracle_denoiser(idx, l, z_t, t, cond);
    return (z_t - idx.schedule.alpha[t] * d) / idx.schedule.beta[t];
}

std::vector<std::pair<int, double>> neighbor_report(const OracleIndex& idx, int l,
                                                    int query, int K) {
    const int n = idx.items();
    if (K >= n || K < 1) throw std::invalid_argument("neighbor_report: need 1 <= K < N");
    if (query < 0 || query >= n) throw std::invalid_argument("neighbor_report: bad query");
    const Eigen::MatrixXd& zl = idx.latents[l];
    std::vector<std::pair<double, int>> order(n);
    for (int i = 0; i < n; ++i) {
        order[i] = {(zl.row(query) - zl.row(i)).norm(), i};
    }
    std::partial_sort(order.begin(), order.begin() + K, order.end());
    std::vector<std::pair<int, double>> out(K);
    for (int k = 0; k < K; ++k) {
        out[k] = {order[k].second, order[k].first};
    }
    return out;
}

}  // namespace ndm
