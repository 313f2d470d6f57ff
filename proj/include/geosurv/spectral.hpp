// Spectral representations of a map: eigendecomposition of an affinity
// matrix, top-k eigenvector embeddings, k-means over embeddings, and
// similarity-based affinities that mix adjacency with entity descriptors.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geosurv/core.hpp"
#include "geosurv/csv.hpp"
#include "geosurv/geo.hpp"

namespace geosurv {

/// Column j of `vectors` is the unit eigenvector paired with `values[j]`.
/// Pairs are sorted by descending eigenvalue.
struct EigenPairs {
    std::vector<double> values;
    Matrix vectors;
};

/// Entities as rows, selected eigenvectors as columns.
struct SpectralEmbedding {
    Matrix rows;
    std::vector<double> eigenvalues;

    std::size_t entities() const noexcept { return rows.rows(); }
    std::size_t dims() const noexcept { return rows.cols(); }
    std::span<const double> row(std::size_t l) const noexcept { return rows.row(l); }
};

struct ClusterLabels {
    std::vector<int> labels;
    std::size_t clusters = 0;
};

/// Symmetric real affinity built from concatenated adjacency/descriptor
/// vectors; zero diagonal, entries in [-1, 1].
class SsaAffinity {
public:
    SsaAffinity() = default;
    explicit SsaAffinity(Matrix m) : m_(std::move(m)) {}
    std::size_t size() const noexcept { return m_.rows(); }
    double operator()(std::size_t l, std::size_t v) const noexcept { return m_(l, v); }
    const Matrix& matrix() const noexcept { return m_; }

private:
    Matrix m_;
};

enum class SsaMode { Bin, Full };

namespace detail {

/// Flip v so its largest-magnitude entry is positive. Magnitudes within a
/// relative 1e-9 of the maximum are ties, resolved by the lowest index.
inline void fix_sign(std::span<double> v) {
    double max_abs = 0.0;
    for (double x : v) max_abs = std::max(max_abs, std::abs(x));
    if (max_abs == 0.0) return;
    const double cut = max_abs * (1.0 - 1e-9);
    for (double x : v) {
        if (std::abs(x) >= cut) {
            if (x < 0.0) {
                for (double& y : v) y = -y;
            }
            return;
        }
    }
}

inline double off_diagonal_norm(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

}  // namespace detail

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps visit (i, j) pairs in row-major order of the strict upper triangle
/// and stop once the off-diagonal Frobenius norm drops below
/// 1e-10 * max(1, ||M||_F). Eigenvalues come back in descending order; equal
/// eigenvalues keep the order of the diagonal position they converged at.
inline EigenPairs symmetric_eigen(const Matrix& m) {
    const std::size_t n = m.rows();
    if (n != m.cols()) throw InvalidArgument("symmetric_eigen: matrix must be square");
    double frob = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (!std::isfinite(m(i, j))) throw InvalidArgument("symmetric_eigen: non-finite entry");
            if (std::abs(m(i, j) - m(j, i)) > 1e-10) {
                throw InvalidArgument("symmetric_eigen: matrix is not symmetric");
            }
            frob += m(i, j) * m(i, j);
        }
    }
    frob = std::sqrt(frob);

    Matrix a = m;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (m(i, j) + m(j, i));
    Matrix v = Matrix::identity(n);

    const double tol = 1e-10 * std::max(1.0, frob);
    constexpr int kMaxSweeps = 100;
    int sweep = 0;
    while (detail::off_diagonal_norm(a) >= tol) {
        if (++sweep > kMaxSweeps) throw Error("symmetric_eigen: Jacobi iteration did not converge");
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                // Rotation angle that annihilates a(p, q); t = tan(theta) with |theta| <= pi/4.
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = a(q, p) = 0.0;
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;

                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

    EigenPairs out{std::vector<double>(n), Matrix(n, n)};
    std::vector<double> col(n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = a(order[j], order[j]);
        for (std::size_t k = 0; k < n; ++k) col[k] = v(k, order[j]);
        detail::fix_sign(col);
        for (std::size_t k = 0; k < n; ++k) out.vectors(k, j) = col[k];
    }
    return out;
}

/// Keeps the k eigenvectors with the largest algebraic eigenvalues.
inline SpectralEmbedding top_k(const EigenPairs& pairs, std::size_t k) {
    const std::size_t p = pairs.values.size();
    if (k < 1 || k > p) {
        throw InvalidArgument("top_k: k=" + std::to_string(k) + " outside [1, " + std::to_string(p) + "]");
    }
    SpectralEmbedding emb{Matrix(p, k), std::vector<double>(pairs.values.begin(), pairs.values.begin() + k)};
    for (std::size_t l = 0; l < p; ++l)
        for (std::size_t j = 0; j < k; ++j) emb.rows(l, j) = pairs.vectors(l, j);
    return emb;
}

struct KMeansOptions {
    int max_iterations = 300;
    double tolerance = 1e-6;
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace detail

/// Lloyd's k-means with k-means++ seeding. Ties in assignment go to the
/// lowest cluster index; an emptied cluster takes over the point farthest
/// from its current centroid.
inline ClusterLabels kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                            KMeansOptions options = {}) {
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    if (k < 1 || k > n) {
        throw InvalidArgument("kmeans: k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
    }
    Rng rng(seed);

    Matrix centroids(k, d);
    std::vector<bool> chosen(n, false);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    auto take = [&](std::size_t c, std::size_t idx) {
        chosen[idx] = true;
        std::copy(points.row(idx).begin(), points.row(idx).end(), centroids.row(c).begin());
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], detail::squared_distance(points.row(i), centroids.row(c)));
    };
    take(0, static_cast<std::size_t>(rng.below(n)));
    for (std::size_t c = 1; c < k; ++c) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick = n;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (d2[i] <= 0.0) continue;
                acc += d2[i];
                pick = i;
                if (acc > target) break;
            }
        } else {
            // All remaining points coincide with a centre; take the first unused one.
            for (std::size_t i = 0; i < n && pick == n; ++i)
                if (!chosen[i]) pick = i;
        }
        take(c, pick);
    }

    std::vector<int> labels(n, 0);
    auto assign = [&] {
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double dist = detail::squared_distance(points.row(i), centroids.row(c));
                if (dist < best) {
                    best = dist;
                    labels[i] = static_cast<int>(c);
                }
            }
        }
    };

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        assign();

        std::vector<std::size_t> counts(k, 0);
        for (int l : labels) ++counts[static_cast<std::size_t>(l)];
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far = n;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const auto li = static_cast<std::size_t>(labels[i]);
                if (counts[li] < 2) continue;
                const double dist = detail::squared_distance(points.row(i), centroids.row(li));
                if (dist > far_d) {
                    far_d = dist;
                    far = i;
                }
            }
            if (far == n) break;
            --counts[static_cast<std::size_t>(labels[far])];
            labels[far] = static_cast<int>(c);
            counts[c] = 1;
        }

        Matrix next(k, d);
        for (std::size_t i = 0; i < n; ++i) {
            auto dst = next.row(static_cast<std::size_t>(labels[i]));
            const auto src = points.row(i);
            for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                std::copy(centroids.row(c).begin(), centroids.row(c).end(), next.row(c).begin());
                continue;
            }
            for (double& x : next.row(c)) x /= static_cast<double>(counts[c]);
            shift = std::max(shift, std::sqrt(detail::squared_distance(next.row(c), centroids.row(c))));
        }
        centroids = std::move(next);
        if (shift < options.tolerance) break;
    }
    return ClusterLabels{std::move(labels), k};
}

inline ClusterLabels kmeans(const SpectralEmbedding& embedding, std::size_t k, std::uint64_t seed,
                            KMeansOptions options = {}) {
    return kmeans(embedding.rows, k, seed, options);
}

/// Embedding row of the entity containing `point`.
inline std::vector<double> enrich(const GeoPoint& point, const GeoMap& map,
                                  const SpectralEmbedding& embedding,
                                  OutsidePolicy policy = OutsidePolicy::Error) {
    if (embedding.entities() != map.size()) {
        throw InvalidArgument("enrich: embedding rows do not match map size");
    }
    const auto l = locate_index(point, map, policy);
    const auto r = embedding.row(l);
    return {r.begin(), r.end()};
}

/// Cosine similarity; defined as 0 when either vector is all zeros.
inline double cosine(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw InvalidArgument("cosine: length mismatch");
    const double nu = norm2(u);
    const double nv = norm2(v);
    if (nu == 0.0 || nv == 0.0) return 0.0;
    const double c = dot(u, v) / (nu * nv);
    return std::clamp(c, -1.0, 1.0);
}

/// Pairwise cosine similarity of the concatenations
///   bin:  [Z(l,v), A(l)]  vs  [Z(v,l), A(v)]
///   full: [Z(l,:), A(l)]  vs  [Z(v,:), A(v)]
/// for every l < v; the diagonal stays zero.
inline SsaAffinity ssa_affinity(const AdjacencyMatrix& adjacency, const DesignMatrix& design,
                                SsaMode mode) {
    const std::size_t p = adjacency.size();
    if (design.rows() != p) {
        throw InvalidArgument("ssa_affinity: design matrix has " + std::to_string(design.rows()) +
                              " rows, adjacency has " + std::to_string(p));
    }
    if (p < 2) throw InvalidArgument("ssa_affinity: need at least two entities");
    const std::size_t h = design.features();
    Matrix out(p, p);

    if (mode == SsaMode::Full) {
        Matrix concat(p, p + h);
        for (std::size_t l = 0; l < p; ++l) {
            auto r = concat.row(l);
            std::copy(adjacency.row(l).begin(), adjacency.row(l).end(), r.begin());
            std::copy(design.row(l).begin(), design.row(l).end(), r.begin() + static_cast<std::ptrdiff_t>(p));
        }
        for (std::size_t l = 0; l < p; ++l)
            for (std::size_t v = l + 1; v < p; ++v)
                out(l, v) = out(v, l) = cosine(concat.row(l), concat.row(v));
        return SsaAffinity(std::move(out));
    }

    // bin: the leading scalar is shared by both vectors (Z is symmetric), so
    // the dot product and norms decompose into that scalar plus descriptor terms.
    std::vector<double> sq(p);
    for (std::size_t l = 0; l < p; ++l) sq[l] = dot(design.row(l), design.row(l));
    for (std::size_t l = 0; l < p; ++l) {
        for (std::size_t v = l + 1; v < p; ++v) {
            const double z = adjacency(l, v);
            const double num = z * z + dot(design.row(l), design.row(v));
            const double nl = std::sqrt(z * z + sq[l]);
            const double nv = std::sqrt(z * z + sq[v]);
            const double c = (nl == 0.0 || nv == 0.0) ? 0.0 : std::clamp(num / (nl * nv), -1.0, 1.0);
            out(l, v) = out(v, l) = c;
        }
    }
    return SsaAffinity(std::move(out));
}

/// Top-k eigenvectors of the map's raw adjacency matrix.
inline SpectralEmbedding rr_sa_embedding(const GeoMap& map, std::size_t k) {
    const auto adjacency = build_adjacency(map);
    return top_k(symmetric_eigen(adjacency.matrix()), k);
}

/// Top-k eigenvectors of the similarity-based affinity of the map.
inline SpectralEmbedding rr_ssa_embedding(const GeoMap& map, const DesignMatrix& design, SsaMode mode,
                                          std::size_t k) {
    const auto adjacency = build_adjacency(map);
    const auto affinity = ssa_affinity(adjacency, design, mode);
    return top_k(symmetric_eigen(affinity.matrix()), k);
}

/// CSV `key,c1,...,ck`.
inline std::string embedding_csv(const GeoMap& map, const SpectralEmbedding& embedding) {
    if (embedding.entities() != map.size()) {
        throw InvalidArgument("embedding_csv: embedding rows do not match map size");
    }
    std::string out = "key";
    for (std::size_t j = 0; j < embedding.dims(); ++j) out += ",c" + std::to_string(j + 1);
    out += '\n';
    for (std::size_t l = 0; l < map.size(); ++l) {
        out += map[l].key;
        for (double x : embedding.row(l)) out += "," + csv::format(x);
        out += '\n';
    }
    return out;
}

/// CSV `key,label`.
inline std::string clusters_csv(const GeoMap& map, const ClusterLabels& labels) {
    if (labels.labels.size() != map.size()) {
        throw InvalidArgument("clusters_csv: label count does not match map size");
    }
    std::string out = "key,label\n";
    for (std::size_t l = 0; l < map.size(); ++l) {
        out += map[l].key + "," + std::to_string(labels.labels[l]) + "\n";
    }
    return out;
}

}  // namespace geosurv
