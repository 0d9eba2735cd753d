#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <variant>
#include <vector>

#include "feakm/keypoint.hpp"
#include "feakm/rng.hpp"

namespace feakm {

// Sums after sorting, so the result is bit-identical for any permutation of
// the inputs. Attention reductions go through here; that is what makes the
// permutation-equivariance property hold exactly, not just approximately.
inline double stable_sum(std::vector<double>& vals) {
    std::sort(vals.begin(), vals.end());
    double acc = 0.0;
    for (double v : vals) acc += v;
    return acc;
}

// Rotates consecutive coordinate pairs of vec; pair k turns by
// position[k % 2] * base^(-2k / D). Alternating axes gives x and y the same
// frequency coverage. Norm-preserving, and attention logits built from two
// rotary-encoded vectors depend on the position difference only.
inline Eigen::VectorXd rotary_encode(const Eigen::VectorXd& vec, const Eigen::Vector2d& position,
                                     double base_frequency = 10000.0) {
    const int d = static_cast<int>(vec.size());
    if (d % 2 != 0) throw std::invalid_argument("rotary_encode: dimension must be even");
    Eigen::VectorXd out(d);
    for (int k = 0; k < d / 2; ++k) {
        const double omega = std::pow(base_frequency, -2.0 * k / d);
        const double theta = position[k % 2] * omega;
        const double c = std::cos(theta), s = std::sin(theta);
        const double v0 = vec[2 * k], v1 = vec[2 * k + 1];
        out[2 * k] = c * v0 - s * v1;
        out[2 * k + 1] = s * v0 + c * v1;
    }
    return out;
}

struct AttentionLayer {
    Eigen::MatrixXd w_query;
    Eigen::MatrixXd w_key;
    Eigen::MatrixXd w_value;
};

// Untrained projection weights, reproducible from the seed. The forward pass
// is the real thing; training them is out of scope here.
struct AttentionWeights {
    std::vector<AttentionLayer> layers;
    std::uint64_t seed = 0;
};

inline AttentionWeights make_attention_weights(int dim, int n_layers, std::uint64_t seed) {
    AttentionWeights w;
    w.seed = seed;
    Rng rng(derive_seed(seed, 0xa77));
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    for (int l = 0; l < n_layers; ++l) {
        AttentionLayer layer;
        for (Eigen::MatrixXd* m : {&layer.w_query, &layer.w_key, &layer.w_value}) {
            m->resize(dim, dim);
            for (int r = 0; r < dim; ++r) {
                for (int c = 0; c < dim; ++c) (*m)(r, c) = rng.normal(0.0, scale);
            }
        }
        w.layers.push_back(std::move(layer));
    }
    return w;
}

// Descriptors plus their grid positions, double precision for the attention
// path.
struct AttendedSet {
    Eigen::MatrixXd descriptors;  // N x D
    std::vector<Eigen::Vector2d> positions;
};

// Row-stochastic attention matrix p_ij = softmax_j(q_i . k_j) with queries
// from dst and keys from src, both rotary-encoded at their positions.
inline Eigen::MatrixXd attention_probabilities(const AttendedSet& dst, const AttendedSet& src,
                                               const AttentionLayer& w, double rotary_base) {
    const Eigen::Index n_dst = dst.descriptors.rows();
    const Eigen::Index n_src = src.descriptors.rows();
    Eigen::MatrixXd p(n_dst, n_src);
    if (n_dst == 0 || n_src == 0) return p;

    std::vector<Eigen::VectorXd> keys(n_src);
    for (Eigen::Index j = 0; j < n_src; ++j) {
        keys[j] = rotary_encode(w.w_key * src.descriptors.row(j).transpose(), src.positions[j],
                                rotary_base);
    }
    std::vector<double> terms;
    for (Eigen::Index i = 0; i < n_dst; ++i) {
        const Eigen::VectorXd q =
            rotary_encode(w.w_query * dst.descriptors.row(i).transpose(), dst.positions[i],
                          rotary_base);
        Eigen::VectorXd logits(n_src);
        for (Eigen::Index j = 0; j < n_src; ++j) logits[j] = q.dot(keys[j]);
        const double m = logits.maxCoeff();
        terms.assign(n_src, 0.0);
        for (Eigen::Index j = 0; j < n_src; ++j) {
            p(i, j) = std::exp(logits[j] - m);
            terms[j] = p(i, j);
        }
        p.row(i) /= stable_sum(terms);
    }
    return p;
}

namespace detail {

// One attention pass: queries from `dst`, keys/values from `src`, output
// residual-added onto dst. Reductions use stable_sum.
inline Eigen::MatrixXd attend(const AttendedSet& dst, const AttendedSet& src,
                              const AttentionLayer& w, double rotary_base) {
    const Eigen::Index n_dst = dst.descriptors.rows();
    const Eigen::Index n_src = src.descriptors.rows();
    const Eigen::Index dim = dst.descriptors.cols();
    Eigen::MatrixXd out = dst.descriptors;
    if (n_src == 0 || n_dst == 0) return out;

    const Eigen::MatrixXd p = attention_probabilities(dst, src, w, rotary_base);
    std::vector<Eigen::VectorXd> values(n_src);
    for (Eigen::Index j = 0; j < n_src; ++j) {
        values[j] = w.w_value * src.descriptors.row(j).transpose();
    }
    std::vector<double> terms;
    for (Eigen::Index i = 0; i < n_dst; ++i) {
        for (Eigen::Index d = 0; d < dim; ++d) {
            terms.assign(n_src, 0.0);
            for (Eigen::Index j = 0; j < n_src; ++j) terms[j] = p(i, j) * values[j][d];
            out(i, d) += stable_sum(terms);
        }
    }
    return out;
}

}  // namespace detail

// One matcher round: self-attention within each set, then cross-attention
// between the sets, residual-added. Empty sets pass through unchanged.
inline std::pair<AttendedSet, AttendedSet> attention_round(const AttendedSet& set_a,
                                                           const AttendedSet& set_b,
                                                           const AttentionLayer& w,
                                                           double rotary_base = 10000.0) {
    AttendedSet a = set_a;
    AttendedSet b = set_b;
    a.descriptors = detail::attend(set_a, set_a, w, rotary_base);
    b.descriptors = detail::attend(set_b, set_b, w, rotary_base);
    const AttendedSet a_mid = a, b_mid = b;
    a.descriptors = detail::attend(a_mid, b_mid, w, rotary_base);
    b.descriptors = detail::attend(b_mid, a_mid, w, rotary_base);
    return {std::move(a), std::move(b)};
}

// Soft correspondence matrix between two keypoint sets. Each row of
// [scores | row_bin] and each column of [scores ; col_bin] sums to 1.
struct AssignmentMatrix {
    Eigen::MatrixXd scores;  // M x N, in [0, 1]
    Eigen::VectorXd row_bin;  // M, unmatched mass per row
    Eigen::VectorXd col_bin;  // N

    double max_marginal_violation() const {
        double worst = 0.0;
        for (Eigen::Index i = 0; i < scores.rows(); ++i) {
            worst = std::max(worst, std::abs(scores.row(i).sum() + row_bin[i] - 1.0));
        }
        for (Eigen::Index j = 0; j < scores.cols(); ++j) {
            worst = std::max(worst, std::abs(scores.col(j).sum() + col_bin[j] - 1.0));
        }
        return worst;
    }
};

// Similarity = desc_a . desc_b^T / temperature, augmented with a constant
// dustbin score, normalized by log-space Sinkhorn over the augmented matrix
// (dustbin row/column take the slack mass, as in SuperGlue). Runs at least
// sinkhorn_iters rounds, then keeps going until the marginals settle.
inline AssignmentMatrix build_assignment(const Eigen::MatrixXf& desc_a,
                                         const Eigen::MatrixXf& desc_b, double temperature,
                                         int sinkhorn_iters, double dustbin_score = 5.0) {
    const Eigen::Index m = desc_a.rows();
    const Eigen::Index n = desc_b.rows();
    AssignmentMatrix out;
    out.scores = Eigen::MatrixXd::Zero(m, n);
    out.row_bin = Eigen::VectorXd::Ones(m);
    out.col_bin = Eigen::VectorXd::Ones(n);
    if (m == 0 || n == 0) return out;  // all mass in the bins
    if (temperature <= 0.0) throw std::invalid_argument("build_assignment: temperature must be positive");

    // Augmented log-score matrix, (m+1) x (n+1).
    Eigen::MatrixXd z(m + 1, n + 1);
    z.topLeftCorner(m, n) =
        (desc_a.cast<double>() * desc_b.cast<double>().transpose()) / temperature;
    z.row(m).setConstant(dustbin_score);
    z.col(n).setConstant(dustbin_score);

    // Marginals: each real point carries unit mass, each bin carries the mass
    // of the whole opposite set.
    Eigen::VectorXd log_mu = Eigen::VectorXd::Zero(m + 1);
    log_mu[m] = std::log(static_cast<double>(n));
    Eigen::VectorXd log_nu = Eigen::VectorXd::Zero(n + 1);
    log_nu[n] = std::log(static_cast<double>(m));

    Eigen::VectorXd u = Eigen::VectorXd::Zero(m + 1);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n + 1);
    auto log_sum_exp = [](const Eigen::VectorXd& x) {
        const double mx = x.maxCoeff();
        return mx + std::log((x.array() - mx).exp().sum());
    };

    const int max_rounds = std::max(sinkhorn_iters, 2000);
    for (int round = 0; round < max_rounds; ++round) {
        for (Eigen::Index i = 0; i <= m; ++i) {
            u[i] = log_mu[i] - log_sum_exp(z.row(i).transpose() + v);
        }
        for (Eigen::Index j = 0; j <= n; ++j) {
            v[j] = log_nu[j] - log_sum_exp(z.col(j) + u);
        }
        if (round + 1 < sinkhorn_iters) continue;
        // Column step just ran, so columns are exact; stop once rows settle.
        double row_violation = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            double s = 0.0;
            for (Eigen::Index j = 0; j <= n; ++j) s += std::exp(z(i, j) + u[i] + v[j]);
            row_violation = std::max(row_violation, std::abs(s - 1.0));
        }
        if (row_violation <= 1e-9) break;
    }

    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            out.scores(i, j) = std::clamp(std::exp(z(i, j) + u[i] + v[j]), 0.0, 1.0);
        }
        out.row_bin[i] = std::clamp(std::exp(z(i, n) + u[i] + v[n]), 0.0, 1.0);
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        out.col_bin[j] = std::clamp(std::exp(z(m, j) + u[m] + v[j]), 0.0, 1.0);
    }
    return out;
}

struct MatchPair {
    int index_a = 0;
    int index_b = 0;
    double confidence = 0.0;
};

// One-to-one matches with confidences descending; coords ride along when the
// caller provides them.
struct MatchSet {
    std::vector<MatchPair> pairs;
    std::vector<Eigen::Vector2d> coords_a;  // per pair, source set cells
    std::vector<Eigen::Vector2d> coords_b;
};

// Too few surviving pairs. A value, not an error: it signals fallback to the
// reported pose.
struct MatchFailure {
    int pairs_found = 0;
    int pairs_required = 0;
};

using MatchResult = std::variant<MatchSet, MatchFailure>;

// Keeps mutual-argmax pairs with score >= confidence_floor; below min_pairs
// the whole match is rejected.
inline MatchResult filter_matches(const AssignmentMatrix& a, double confidence_floor, int min_pairs,
                                  const std::vector<Eigen::Vector2d>& coords_a = {},
                                  const std::vector<Eigen::Vector2d>& coords_b = {}) {
    if (min_pairs < 2) throw std::invalid_argument("filter_matches: min_pairs must be >= 2");
    const Eigen::Index m = a.scores.rows();
    const Eigen::Index n = a.scores.cols();
    std::vector<MatchPair> pairs;
    if (m > 0 && n > 0) {
        std::vector<Eigen::Index> col_best(n, -1);
        for (Eigen::Index j = 0; j < n; ++j) {
            a.scores.col(j).maxCoeff(&col_best[j]);
        }
        for (Eigen::Index i = 0; i < m; ++i) {
            Eigen::Index j = -1;
            const double score = a.scores.row(i).maxCoeff(&j);
            if (col_best[j] == i && score >= confidence_floor) {
                pairs.push_back({static_cast<int>(i), static_cast<int>(j), score});
            }
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const MatchPair& x, const MatchPair& y) {
        return x.confidence > y.confidence;
    });
    if (static_cast<int>(pairs.size()) < min_pairs) {
        return MatchFailure{static_cast<int>(pairs.size()), min_pairs};
    }
    MatchSet out;
    out.pairs = std::move(pairs);
    if (!coords_a.empty() && !coords_b.empty()) {
        for (const MatchPair& p : out.pairs) {
            out.coords_a.push_back(coords_a[static_cast<std::size_t>(p.index_a)]);
            out.coords_b.push_back(coords_b[static_cast<std::size_t>(p.index_b)]);
        }
    }
    return out;
}

struct MatcherParams {
    double temperature = 0.1;
    int sinkhorn_iters = 20;
    double confidence_floor = 0.2;
    int min_pairs = 4;          // the K-pairs gate
    int attention_rounds = 0;   // 0 = raw descriptor similarity (default path)
    int attention_layers = 2;
    double rotary_base = 10000.0;
    double dustbin_score = 5.0;
    std::uint64_t weights_seed = 7;
};

// Full matching stage for two keypoint sets. Attention rounds are optional;
// descriptors are renormalized before the assignment either way.
inline MatchResult match_keypoints(const KeypointSet& kp_a, const KeypointSet& kp_b,
                                   const MatcherParams& params) {
    Eigen::MatrixXf desc_a = kp_a.descriptors;
    Eigen::MatrixXf desc_b = kp_b.descriptors;
    if (params.attention_rounds > 0 && desc_a.cols() > 0) {
        const AttentionWeights weights = make_attention_weights(
            static_cast<int>(desc_a.cols()), params.attention_layers, params.weights_seed);
        AttendedSet a{desc_a.cast<double>(), kp_a.coords};
        AttendedSet b{desc_b.cast<double>(), kp_b.coords};
        for (int r = 0; r < params.attention_rounds; ++r) {
            const AttentionLayer& layer = weights.layers[r % weights.layers.size()];
            std::tie(a, b) = attention_round(a, b, layer, params.rotary_base);
        }
        a.descriptors.rowwise().normalize();
        b.descriptors.rowwise().normalize();
        desc_a = a.descriptors.cast<float>();
        desc_b = b.descriptors.cast<float>();
    }
    const AssignmentMatrix assignment = build_assignment(
        desc_a, desc_b, params.temperature, params.sinkhorn_iters, params.dustbin_score);
    return filter_matches(assignment, params.confidence_floor, params.min_pairs, kp_a.coords,
                          kp_b.coords);
}

}  // namespace feakm
