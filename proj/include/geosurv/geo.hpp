// Polygon maps of discrete geographic entities: parsing, point membership,
// vertex-sharing adjacency, per-entity descriptor tables and one-hot codes.
//
// Coordinates are quantized to 1e-6 degrees on ingest and all geometric
// predicates run on the integer grid, so membership and adjacency are exact.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "geosurv/core.hpp"
#include "geosurv/csv.hpp"

namespace geosurv {

inline constexpr double kCoordScale = 1e6;

inline std::int64_t quantize(double degrees) {
    if (!std::isfinite(degrees)) throw InvalidArgument("non-finite coordinate");
    return std::llround(degrees * kCoordScale);
}

/// A (lat, lon) pair on the 1e-6 degree grid.
class GeoPoint {
public:
    GeoPoint() = default;
    GeoPoint(double lat, double lon) : qlat_(quantize(lat)), qlon_(quantize(lon)) {}

    static GeoPoint from_quantized(std::int64_t qlat, std::int64_t qlon) {
        GeoPoint p;
        p.qlat_ = qlat;
        p.qlon_ = qlon;
        return p;
    }

    double lat() const noexcept { return static_cast<double>(qlat_) / kCoordScale; }
    double lon() const noexcept { return static_cast<double>(qlon_) / kCoordScale; }
    std::int64_t qlat() const noexcept { return qlat_; }
    std::int64_t qlon() const noexcept { return qlon_; }

    auto operator<=>(const GeoPoint&) const = default;

private:
    std::int64_t qlat_ = 0;
    std::int64_t qlon_ = 0;
};

struct GeoEntity {
    std::string key;
    /// Open ring: the closing vertex, when present in the source, is dropped.
    std::vector<GeoPoint> boundary;
};

/// Ordered, keyed collection of polygon boundaries. Immutable once built.
class GeoMap {
public:
    GeoMap() = default;

    explicit GeoMap(std::vector<GeoEntity> entities) : entities_(std::move(entities)) {
        for (std::size_t i = 0; i < entities_.size(); ++i) {
            auto& ring = entities_[i].boundary;
            if (ring.size() >= 2 && ring.front() == ring.back()) ring.pop_back();
            if (ring.size() < 3) {
                throw InvalidArgument("entity '" + entities_[i].key +
                                      "' has fewer than 3 distinct ring vertices");
            }
            if (!index_.emplace(entities_[i].key, i).second) {
                throw InvalidArgument("duplicate entity key '" + entities_[i].key + "'");
            }
        }
    }

    std::size_t size() const noexcept { return entities_.size(); }
    bool empty() const noexcept { return entities_.empty(); }
    const std::vector<GeoEntity>& entities() const noexcept { return entities_; }
    const GeoEntity& operator[](std::size_t i) const { return entities_.at(i); }

    std::optional<std::size_t> index_of(std::string_view key) const {
        const auto it = index_.find(std::string(key));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::vector<std::string> keys() const {
        std::vector<std::string> out;
        out.reserve(entities_.size());
        for (const auto& e : entities_) out.push_back(e.key);
        return out;
    }

private:
    std::vector<GeoEntity> entities_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Binary, symmetric, zero-diagonal entity adjacency.
class AdjacencyMatrix {
public:
    AdjacencyMatrix() = default;
    explicit AdjacencyMatrix(Matrix m) : m_(std::move(m)) {
        if (m_.rows() != m_.cols()) throw InvalidArgument("adjacency matrix must be square");
        for (std::size_t i = 0; i < m_.rows(); ++i) {
            if (m_(i, i) != 0.0) throw InvalidArgument("adjacency matrix diagonal must be zero");
            for (std::size_t j = 0; j < m_.cols(); ++j) {
                const double v = m_(i, j);
                if ((v != 0.0 && v != 1.0) || v != m_(j, i)) {
                    throw InvalidArgument("adjacency matrix must be symmetric with 0/1 entries");
                }
            }
        }
    }

    std::size_t size() const noexcept { return m_.rows(); }
    double operator()(std::size_t l, std::size_t v) const noexcept { return m_(l, v); }
    std::span<const double> row(std::size_t l) const noexcept { return m_.row(l); }
    const Matrix& matrix() const noexcept { return m_; }

private:
    Matrix m_;
};

/// Per-entity descriptive features, rows aligned with GeoMap entry order.
class DesignMatrix {
public:
    DesignMatrix() = default;
    DesignMatrix(Matrix m, std::vector<std::string> feature_names)
        : m_(std::move(m)), names_(std::move(feature_names)) {
        for (double v : m_.data()) {
            if (!std::isfinite(v)) throw InvalidArgument("design matrix has non-finite values");
        }
        if (!names_.empty() && names_.size() != m_.cols()) {
            throw InvalidArgument("design matrix feature names do not match column count");
        }
    }
    explicit DesignMatrix(Matrix m) : DesignMatrix(std::move(m), {}) {}

    std::size_t rows() const noexcept { return m_.rows(); }
    std::size_t features() const noexcept { return m_.cols(); }
    std::span<const double> row(std::size_t l) const noexcept { return m_.row(l); }
    const Matrix& matrix() const noexcept { return m_; }
    const std::vector<std::string>& feature_names() const noexcept { return names_; }

private:
    Matrix m_;
    std::vector<std::string> names_;
};

/// Parses `[{"key": "...", "boundary": [[lat, lon], ...]}, ...]`.
/// An empty or whitespace-only document yields an empty map.
inline GeoMap parse_map(std::string_view text) {
    if (csv::trim(text).find_first_not_of(" \t\r\n") == std::string_view::npos) return GeoMap{};
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("map document: ") + e.what());
    }
    if (!doc.is_array()) throw ParseError("map document: top level must be an array");

    std::vector<GeoEntity> entities;
    entities.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& item = doc[i];
        const auto where = "map entry " + std::to_string(i);
        if (!item.is_object() || !item.contains("key") || !item.contains("boundary")) {
            throw ParseError(where + ": expected object with 'key' and 'boundary'");
        }
        if (!item["key"].is_string()) throw ParseError(where + ": 'key' must be a string");
        const auto& ring = item["boundary"];
        if (!ring.is_array()) throw ParseError(where + ": 'boundary' must be an array");
        GeoEntity entity{item["key"].get<std::string>(), {}};
        entity.boundary.reserve(ring.size());
        for (const auto& vertex : ring) {
            if (!vertex.is_array() || vertex.size() != 2 || !vertex[0].is_number() ||
                !vertex[1].is_number()) {
                throw ParseError(where + ": vertices must be [lat, lon] number pairs");
            }
            const double lat = vertex[0].get<double>();
            const double lon = vertex[1].get<double>();
            if (!std::isfinite(lat) || !std::isfinite(lon)) {
                throw ParseError(where + ": non-finite coordinate");
            }
            entity.boundary.emplace_back(lat, lon);
        }
        entities.push_back(std::move(entity));
    }
    try {
        return GeoMap(std::move(entities));
    } catch (const InvalidArgument& e) {
        throw ParseError(std::string("map document: ") + e.what());
    }
}

inline std::string dump_map(const GeoMap& map) {
    std::string out = "[\n";
    for (std::size_t i = 0; i < map.size(); ++i) {
        const auto& e = map[i];
        out += "  {\"key\": " + nlohmann::json(e.key).dump() + ", \"boundary\": [";
        for (std::size_t j = 0; j <= e.boundary.size(); ++j) {
            const auto& v = e.boundary[j % e.boundary.size()];
            if (j) out += ", ";
            out += "[" + csv::format(v.lat()) + ", " + csv::format(v.lon()) + "]";
        }
        out += i + 1 < map.size() ? "]},\n" : "]}\n";
    }
    out += "]\n";
    return out;
}

namespace detail {

inline bool on_segment(const GeoPoint& a, const GeoPoint& b, const GeoPoint& p) {
    const std::int64_t cross =
        (b.qlon() - a.qlon()) * (p.qlat() - a.qlat()) - (b.qlat() - a.qlat()) * (p.qlon() - a.qlon());
    if (cross != 0) return false;
    return std::min(a.qlon(), b.qlon()) <= p.qlon() && p.qlon() <= std::max(a.qlon(), b.qlon()) &&
           std::min(a.qlat(), b.qlat()) <= p.qlat() && p.qlat() <= std::max(a.qlat(), b.qlat());
}

inline GeoPoint ring_centroid(const std::vector<GeoPoint>& ring) {
    double lat = 0.0, lon = 0.0;
    for (const auto& v : ring) {
        lat += v.lat();
        lon += v.lon();
    }
    const auto n = static_cast<double>(ring.size());
    return GeoPoint(lat / n, lon / n);
}

}  // namespace detail

/// Even-odd ray casting on the quantized grid; points on an edge or vertex
/// count as inside.
inline bool contains(const std::vector<GeoPoint>& ring, const GeoPoint& p) {
    bool inside = false;
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const auto& a = ring[j];
        const auto& b = ring[i];
        if (detail::on_segment(a, b, p)) return true;
        // Edge straddles the horizontal line through p (half-open rule).
        if ((a.qlat() > p.qlat()) != (b.qlat() > p.qlat())) {
            const std::int64_t dy = b.qlat() - a.qlat();
            const std::int64_t lhs = (p.qlon() - a.qlon()) * dy;
            const std::int64_t rhs = (p.qlat() - a.qlat()) * (b.qlon() - a.qlon());
            if (dy > 0 ? lhs < rhs : lhs > rhs) inside = !inside;
        }
    }
    return inside;
}

enum class OutsidePolicy { Error, NearestCentroid };

/// Index of the first entity (in map order) whose polygon contains `point`.
inline std::size_t locate_index(const GeoPoint& point, const GeoMap& map,
                                OutsidePolicy policy = OutsidePolicy::Error) {
    if (map.empty()) throw InvalidArgument("locate: map is empty");
    for (std::size_t l = 0; l < map.size(); ++l) {
        if (contains(map[l].boundary, point)) return l;
    }
    if (policy == OutsidePolicy::Error) {
        throw OutsideMapError("point (" + csv::format(point.lat()) + ", " + csv::format(point.lon()) +
                              ") lies outside every map entity");
    }
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < map.size(); ++l) {
        const auto c = detail::ring_centroid(map[l].boundary);
        const double dlat = c.lat() - point.lat();
        const double dlon = c.lon() - point.lon();
        const double d2 = dlat * dlat + dlon * dlon;
        if (d2 < best_d2) {
            best_d2 = d2;
            best = l;
        }
    }
    return best;
}

inline const std::string& locate(const GeoPoint& point, const GeoMap& map,
                                 OutsidePolicy policy = OutsidePolicy::Error) {
    return map[locate_index(point, map, policy)].key;
}

/// Entities l != v are adjacent iff their rings share a quantized vertex.
inline AdjacencyMatrix build_adjacency(const GeoMap& map) {
    const std::size_t p = map.size();
    if (p == 0) throw InvalidArgument("build_adjacency: map is empty");
    std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::size_t>> owners;
    for (std::size_t l = 0; l < p; ++l) {
        for (const auto& v : map[l].boundary) {
            auto& list = owners[{v.qlat(), v.qlon()}];
            if (list.empty() || list.back() != l) list.push_back(l);
        }
    }
    Matrix z(p, p);
    for (const auto& [vertex, list] : owners) {
        for (std::size_t a = 0; a < list.size(); ++a) {
            for (std::size_t b = a + 1; b < list.size(); ++b) {
                if (list[a] == list[b]) continue;
                z(list[a], list[b]) = 1.0;
                z(list[b], list[a]) = 1.0;
            }
        }
    }
    return AdjacencyMatrix(std::move(z));
}

/// Reads a `key,f1,...,fh` table and permutes its rows into map order.
inline DesignMatrix load_design_matrix(std::string_view text, const GeoMap& map) {
    const auto table = csv::parse(text);
    if (table.header.empty() || table.header.front() != "key") {
        throw ParseError("design matrix: header must start with 'key'");
    }
    const std::size_t h = table.header.size() - 1;
    Matrix a(map.size(), h);
    std::vector<bool> seen(map.size(), false);
    for (const auto& row : table.rows) {
        const auto idx = map.index_of(row[0]);
        if (!idx) throw ParseError("design matrix: unknown entity key '" + row[0] + "'");
        if (seen[*idx]) throw ParseError("design matrix: duplicate row for '" + row[0] + "'");
        seen[*idx] = true;
        for (std::size_t c = 0; c < h; ++c) {
            a(*idx, c) = csv::to_double(row[c + 1], "design matrix row '" + row[0] + "'");
        }
    }
    for (std::size_t l = 0; l < map.size(); ++l) {
        if (!seen[l]) throw ParseError("design matrix: missing row for '" + map[l].key + "'");
    }
    return DesignMatrix(std::move(a),
                        std::vector<std::string>(table.header.begin() + 1, table.header.end()));
}

inline std::vector<double> one_hot(std::string_view key, const GeoMap& map) {
    const auto idx = map.index_of(key);
    if (!idx) throw InvalidArgument("one_hot: unknown entity key '" + std::string(key) + "'");
    std::vector<double> out(map.size(), 0.0);
    out[*idx] = 1.0;
    return out;
}

}  // namespace geosurv
