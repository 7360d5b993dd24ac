#include "ndm/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

#include "ndm/rng.hpp"

namespace ndm {

namespace {

Eigen::VectorXd flatten_rowmajor(const Eigen::MatrixXd& m) {
    Eigen::VectorXd v(m.size());
    int k = 0;
    for (int y = 0; y < m.rows(); ++y) {
        for (int x = 0; x < m.cols(); ++x) {
            v[k++] = m(y, x);
        }
    }
    return v;
}

void fix_signs(Eigen::MatrixXd& basis) {
    // largest-magnitude component of each direction made positive;
    // magnitude ties resolved by the smallest index
    for (int r = 0; r < basis.rows(); ++r) {
        int arg = 0;
        double best = 0.0;
        for (int c = 0; c < basis.cols(); ++c) {
            const double a = std::abs(basis(r, c));
            if (a > best) {
                best = a;
                arg = c;
            }
        }
        if (basis(r, arg) < 0.0) {
            basis.row(r) = -basis.row(r);
        }
    }
}

}  // namespace

const ScaleProjection& EncoderModel::scale(int M) const {
    for (const auto& s : scales) {
        if (s.patches_per_side == M) return s;
    }
    throw std::invalid_argument("encoder has no projection for scale M=" + std::to_string(M));
}

std::vector<Eigen::MatrixXd> patchify(const Eigen::MatrixXd& image, int M) {
    const int h = static_cast<int>(image.rows());
    const int w = static_cast<int>(image.cols());
    if (M < 1 || h % M != 0 || w % M != 0) {
        throw std::invalid_argument("patchify: image size not divisible by M");
    }
    const int ph = h / M;
    const int pw = w / M;
    std::vector<Eigen::MatrixXd> patches;
    patches.reserve(static_cast<size_t>(M) * M);
    for (int py = 0; py < M; ++py) {
        for (int px = 0; px < M; ++px) {
            patches.push_back(image.block(py * ph, px * pw, ph, pw));
        }
    }
    return patches;
}

Eigen::MatrixXd unpatchify(const std::vector<Eigen::MatrixXd>& patches, int M) {
    if (static_cast<int>(patches.size()) != M * M || patches.empty()) {
        throw std::invalid_argument("unpatchify: wrong patch count");
    }
    const int ph = static_cast<int>(patches[0].rows());
    const int pw = static_cast<int>(patches[0].cols());
    Eigen::MatrixXd image(ph * M, pw * M);
    for (int py = 0; py < M; ++py) {
        for (int px = 0; px < M; ++px) {
            image.block(py * ph, px * pw, ph, pw) = patches[py * M + px];
        }
    }
    return image;
}

EncoderModel fit_encoder(const Dataset& data, int L, int d, uint64_t seed) {
    if (L < 1) throw std::invalid_argument("fit_encoder: L >= 1 required");
    if (data.size() < d) {
        throw std::invalid_argument("fit_encoder: need at least d training images");
    }
    const int h = data.height();
    const int w = data.width();
    if (h != w) throw std::invalid_argument("fit_encoder: images must be square");

    EncoderModel enc;
    enc.image_h = h;
    enc.image_w = w;
    enc.d = d;
    enc.fit_seed = seed;

    for (int M = 1; M <= L - 1; ++M) {
        if (d % M != 0) {
            throw std::invalid_argument("fit_encoder: d must be divisible by every scale M");
        }
        if (h % M != 0) {
            throw std::invalid_argument("fit_encoder: image size must be divisible by every scale M");
        }
        if (h / M < 4) {
            throw std::invalid_argument("fit_encoder: patches below 4x4 are unsupported; reduce L");
        }
        const int retained = d / M;
        const int patch_dim = (h / M) * (w / M);
        if (retained > patch_dim) {
            throw std::invalid_argument("fit_encoder: more channels requested than patch pixels");
        }

        // accumulate mean and scatter over every patch at this scale
        const int n_patches = data.size() * M * M;
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(patch_dim);
        Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(patch_dim, patch_dim);
        for (const auto& img : data.images) {
            for (const auto& patch : patchify(img, M)) {
                const Eigen::VectorXd v = flatten_rowmajor(patch);
                mean += v;
                scatter.noalias() += v * v.transpose();
            }
        }
        mean /= n_patches;
        Eigen::MatrixXd cov =
            (scatter - n_patches * mean * mean.transpose()) / std::max(1, n_patches - 1);

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        if (eig.info() != Eigen::Success) {
            throw std::runtime_error("fit_encoder: eigendecomposition failed");
        }
        if (eig.eigenvalues().maxCoeff() <= 1e-12) {
            throw std::invalid_argument("fit_encoder: degenerate (constant) data at scale M=" +
                                        std::to_string(M));
        }

        // eigenvalues ascend; keep the top `retained` in descending order
        ScaleProjection proj;
        proj.patches_per_side = M;
        proj.mean = mean;
        proj.basis.resize(retained, patch_dim);
        double kept_var = 0.0;
        for (int k = 0; k < retained; ++k) {
            const int src = patch_dim - 1 - k;
            proj.basis.row(k) = eig.eigenvectors().col(src).transpose();
            kept_var += std::max(0.0, eig.eigenvalues()[src]);
        }
        fix_signs(proj.basis);
        const double mean_var = kept_var / retained;
        if (mean_var <= 1e-12) {
            throw std::invalid_argument("fit_encoder: degenerate data at scale M=" +
                                        std::to_string(M));
        }
        proj.feature_scale = 1.0 / std::sqrt(mean_var);
        enc.scales.push_back(std::move(proj));
    }

    enc.fitted = true;
    return enc;
}

EncoderModel scramble_encoder(const EncoderModel& enc, const Dataset& data, uint64_t seed) {
    EncoderModel out = enc;
    out.fit_seed = seed;
    Rng rng(derive_seed(seed, "scramble"));
    for (auto& proj : out.scales) {
        const int M = proj.patches_per_side;
        const int retained = static_cast<int>(proj.basis.rows());
        const int patch_dim = static_cast<int>(proj.basis.cols());
        Eigen::MatrixXd g(patch_dim, retained);
        for (int c = 0; c < retained; ++c) {
            g.col(c) = rng.normal_vec(patch_dim);
        }
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(patch_dim, retained);
        proj.basis = q.transpose();
        fix_signs(proj.basis);

        // renormalize to ~unit coefficient variance, same policy as fitting
        proj.feature_scale = 1.0;
        double sum = 0.0, sum2 = 0.0;
        long count = 0;
        for (const auto& img : data.images) {
            for (const auto& patch : patchify(img, M)) {
                const Eigen::VectorXd c = proj.basis * (flatten_rowmajor(patch) - proj.mean);
                sum += c.sum();
                sum2 += c.squaredNorm();
                count += c.size();
            }
        }
        const double mean = sum / count;
        const double var = std::max(1e-12, sum2 / count - mean * mean);
        proj.feature_scale = 1.0 / std::sqrt(var);
    }
    return out;
}

Eigen::MatrixXd encode_level(const EncoderModel& enc, const Eigen::MatrixXd& image,
                             int l, int L) {
    if (!enc.fitted) throw std::invalid_argument("encode_level: encoder not fitted");
    if (l < 2 || l > L) throw std::invalid_argument("encode_level: level out of range");
    if (image.rows() != enc.image_h || image.cols() != enc.image_w) {
        throw std::invalid_argument("encode_level: image shape mismatch");
    }
    const int M = L - l + 1;
    const ScaleProjection& proj = enc.scale(M);
    const auto patches = patchify(image, M);
    Eigen::MatrixXd z(static_cast<int>(patches.size()), proj.basis.rows());
    for (size_t i = 0; i < patches.size(); ++i) {
        const Eigen::VectorXd v = flatten_rowmajor(patches[i]) - proj.mean;
        z.row(i) = (proj.feature_scale * (proj.basis * v)).transpose();
    }
    return z;
}

Eigen::MatrixXd decode_level(const EncoderModel& enc, const Eigen::MatrixXd& coeffs,
                             int l, int L) {
    const int M = L - l + 1;
    const ScaleProjection& proj = enc.scale(M);
    const int ph = enc.image_h / M;
    const int pw = enc.image_w / M;
    std::vector<Eigen::MatrixXd> patches;
    for (int i = 0; i < coeffs.rows(); ++i) {
        const Eigen::VectorXd v =
            proj.mean + proj.basis.transpose() * (coeffs.row(i).transpose() / proj.feature_scale);
        Eigen::MatrixXd patch(ph, pw);
        int k = 0;
        for (int y = 0; y < ph; ++y) {
            for (int x = 0; x < pw; ++x) {
                patch(y, x) = v[k++];
            }
        }
        patches.push_back(std::move(patch));
    }
    return unpatchify(patches, M);
}

KnnResult knn_accuracy(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                       int K) {
    const int n = static_cast<int>(features.rows());
    if (static_cast<int>(labels.size()) != n) {
        throw std::invalid_argument("knn_accuracy: label count mismatch");
    }
    if (K < 1 || K >= n) throw std::invalid_argument("knn_accuracy: need 1 <= K < N");
    const int n_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    if (n_classes < 2) throw std::invalid_argument("knn_accuracy: need at least 2 classes");

    int hits1 = 0;
    int hits5 = 0;
    std::vector<std::pair<double, int>> order(n - 1);
    for (int i = 0; i < n; ++i) {
        int m = 0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            order[m++] = {(features.row(i) - features.row(j)).squaredNorm(), j};
        }
        std::partial_sort(order.begin(), order.begin() + K, order.end());

        std::vector<int> votes(n_classes, 0);
        for (int k = 0; k < K; ++k) {
            votes[labels[order[k].second]]++;
        }
        // rank voted classes by (count desc, class id asc)
        std::vector<int> ranked;
        for (int c = 0; c < n_classes; ++c) {
            if (votes[c] > 0) ranked.push_back(c);
        }
        std::sort(ranked.begin(), ranked.end(), [&](int a, int b) {
            if (votes[a] != votes[b]) return votes[a] > votes[b];
            return a < b;
        });

        if (ranked[0] == labels[i]) hits1++;
        const int top = std::min<int>(5, static_cast<int>(ranked.size()));
        for (int k = 0; k < top; ++k) {
            if (ranked[k] == labels[i]) {
                hits5++;
                break;
            }
        }
    }
    return {static_cast<double>(hits1) / n, static_cast<double>(hits5) / n};
}

}  // namespace ndm
