#include "jlgcn/pointsets.hpp"

#include "jlgcn/errors.hpp"
#include "tsv.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <numeric>

namespace jlgcn {

namespace {

using detail::TsvReader;
using Point = std::array<double, 3>;

constexpr std::array<std::pair<std::string_view, ShapeFamily>, 6> kFamilies{{
    {"sphere-shell", ShapeFamily::sphere_shell},
    {"cube-surface", ShapeFamily::cube_surface},
    {"plane-disk", ShapeFamily::plane_disk},
    {"two-cluster", ShapeFamily::two_cluster},
    {"helix", ShapeFamily::helix},
    {"torus", ShapeFamily::torus},
}};

Point on_unit_sphere(Rng& rng) {
    for (;;) {
        const Point p{rng.normal(), rng.normal(), rng.normal()};
        const double n = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
        if (n > 1e-12) {
            return {p[0] / n, p[1] / n, p[2] / n};
        }
    }
}

Point sample(ShapeFamily family, Rng& rng) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    switch (family) {
    case ShapeFamily::sphere_shell:
        return on_unit_sphere(rng);
    case ShapeFamily::cube_surface: {
        const auto face = rng.below(6);
        const double a = rng.uniform(-1.0, 1.0);
        const double b = rng.uniform(-1.0, 1.0);
        const double s = face % 2 == 0 ? 1.0 : -1.0;
        switch (face / 2) {
        case 0: return {s, a, b};
        case 1: return {a, s, b};
        default: return {a, b, s};
        }
    }
    case ShapeFamily::plane_disk: {
        const double r = std::sqrt(rng.uniform());
        const double t = two_pi * rng.uniform();
        return {r * std::cos(t), r * std::sin(t), 0.0};
    }
    case ShapeFamily::two_cluster: {
        const double cx = rng.uniform() < 0.5 ? -0.65 : 0.65;
        const Point u = on_unit_sphere(rng);
        return {cx + 0.35 * u[0], 0.35 * u[1], 0.35 * u[2]};
    }
    case ShapeFamily::helix: {
        // two turns of constant speed, so a uniform parameter is uniform in arc length
        const double t = rng.uniform();
        const double a = 2.0 * two_pi * t;
        return {std::cos(a), std::sin(a), 2.0 * t - 1.0};
    }
    case ShapeFamily::torus: {
        constexpr double big = 0.7;
        constexpr double small = 0.3;
        for (;;) {
            const double u = two_pi * rng.uniform();
            const double v = two_pi * rng.uniform();
            // area element is proportional to (big + small cos v)
            if (rng.uniform() * (big + small) <= big + small * std::cos(v)) {
                const double ring = big + small * std::cos(v);
                return {ring * std::cos(u), ring * std::sin(u), small * std::sin(v)};
            }
        }
    }
    }
    throw ConfigError("unknown shape family");
}

DenseMatrix normalize_into_unit_sphere(DenseMatrix p) {
    Point lo{p(0, 0), p(0, 1), p(0, 2)};
    Point hi = lo;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            lo[c] = std::min(lo[c], p(i, c));
            hi[c] = std::max(hi[c], p(i, c));
        }
    }
    double max_norm = 0.0;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        double sq = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            p(i, c) -= 0.5 * (lo[c] + hi[c]);
            sq += p(i, c) * p(i, c);
        }
        max_norm = std::max(max_norm, std::sqrt(sq));
    }
    if (max_norm > 0.0) {
        for (auto& v : p.values()) {
            v /= max_norm;
        }
    }
    return p;
}

} // namespace

std::string_view to_string(ShapeFamily f) {
    for (const auto& [name, value] : kFamilies) {
        if (value == f) {
            return name;
        }
    }
    return "?";
}

ShapeFamily parse_shape_family(std::string_view s) {
    std::string key(s);
    std::replace(key.begin(), key.end(), '_', '-');
    for (const auto& [name, value] : kFamilies) {
        if (name == key) {
            return value;
        }
    }
    throw ConfigError("unknown shape family '" + std::string(s) + "'");
}

const std::vector<ShapeFamily>& all_shape_families() {
    static const std::vector<ShapeFamily> all{
        ShapeFamily::sphere_shell, ShapeFamily::cube_surface, ShapeFamily::plane_disk,
        ShapeFamily::two_cluster,  ShapeFamily::helix,        ShapeFamily::torus};
    return all;
}

PointSetCollection synth_pointsets(const std::vector<ShapeFamily>& families,
                                   std::size_t per_class, std::size_t points, double noise,
                                   Rng& rng) {
    if (points < 8) {
        throw ConfigError("synth_pointsets: need at least 8 points per instance");
    }
    if (families.empty() || per_class == 0) {
        throw ConfigError("synth_pointsets: need at least one family and one instance");
    }
    if (!(noise >= 0.0)) {
        throw ConfigError("synth_pointsets: noise must be non-negative");
    }
    PointSetCollection out;
    for (ShapeFamily f : families) {
        out.class_names.emplace_back(to_string(f));
    }
    for (std::size_t k = 0; k < families.size(); ++k) {
        for (std::size_t m = 0; m < per_class; ++m) {
            DenseMatrix p(points, 3);
            for (std::size_t i = 0; i < points; ++i) {
                const Point q = sample(families[k], rng);
                for (std::size_t c = 0; c < 3; ++c) {
                    p(i, c) = q[c] + (noise > 0.0 ? noise * rng.normal() : 0.0);
                }
            }
            out.instances.push_back({normalize_into_unit_sphere(std::move(p)), static_cast<int>(k)});
        }
    }
    const std::size_t n = out.instances.size();
    out.train.assign(n, false);
    out.val.assign(n, false);
    out.test.assign(n, false);
    return out;
}

void split_pointsets(PointSetCollection& collection, double test_fraction, double val_fraction,
                     Rng& rng) {
    if (!(test_fraction >= 0.0 && val_fraction >= 0.0 && test_fraction + val_fraction < 1.0)) {
        throw ConfigError("split_pointsets: fractions must be non-negative and sum below 1");
    }
    const std::size_t n = collection.instances.size();
    collection.train.assign(n, false);
    collection.val.assign(n, false);
    collection.test.assign(n, false);
    for (std::size_t k = 0; k < collection.num_classes(); ++k) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < n; ++i) {
            if (collection.instances[i].label == static_cast<int>(k)) {
                members.push_back(i);
            }
        }
        rng.shuffle(std::span<std::size_t>(members));
        const auto count = static_cast<double>(members.size());
        const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * count));
        const auto n_val = static_cast<std::size_t>(std::lround(val_fraction * count));
        for (std::size_t m = 0; m < members.size(); ++m) {
            (m < n_test ? collection.test : m < n_test + n_val ? collection.val : collection.train)
                [members[m]] = true;
        }
    }
}

DenseMatrix drop_points(const DenseMatrix& points, double ratio, Rng& rng) {
    if (!(ratio >= 0.0 && ratio < 1.0)) {
        throw ConfigError("drop_points: ratio must lie in [0, 1)");
    }
    const std::size_t n = points.rows();
    auto drop = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
    drop = std::min(drop, n > 0 ? n - 1 : 0);
    if (drop == 0) {
        return points;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<bool> removed(n, false);
    for (std::size_t k = 0; k < drop; ++k) {
        removed[order[k]] = true;
    }
    DenseMatrix out(n - drop, points.cols());
    std::size_t r = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!removed[i]) {
            std::copy(points.row(i).begin(), points.row(i).end(), out.row(r++).begin());
        }
    }
    return out;
}

void save_pointsets(const PointSetCollection& collection, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        auto out = detail::open_out(dir / "classes.tsv");
        for (std::size_t k = 0; k < collection.class_names.size(); ++k) {
            out << k << '\t' << collection.class_names[k] << '\n';
        }
    }
    auto index = detail::open_out(dir / "index.tsv");
    const std::size_t n = collection.instances.size();
    for (std::size_t i = 0; i < n; ++i) {
        const PointSet& ps = collection.instances[i];
        const std::string id = "inst" + std::to_string(i);
        const bool has_split = collection.train.size() == n;
        const char* split = !has_split              ? "none"
                            : collection.train[i]   ? "train"
                            : collection.val[i]     ? "val"
                            : collection.test[i]    ? "test"
                                                    : "none";
        index << id << '\t' << ps.label << '\t' << split << '\n';
        auto feats = detail::open_out(dir / (id + ".features.tsv"));
        auto labels = detail::open_out(dir / (id + ".labels.tsv"));
        feats << std::setprecision(17);
        for (std::size_t p = 0; p < ps.points.rows(); ++p) {
            feats << p;
            for (double v : ps.points.row(p)) {
                feats << '\t' << v;
            }
            feats << '\n';
            labels << p << '\t' << ps.label << '\n';
        }
    }
}

PointSetCollection load_pointsets(const std::filesystem::path& dir) {
    PointSetCollection out;
    {
        TsvReader r(dir / "classes.tsv");
        while (r.next()) {
            r.expect_fields(2);
            if (r.integer(0) != static_cast<long long>(out.class_names.size())) {
                r.fail("class ids must be listed in order starting at 0");
            }
            out.class_names.push_back(r.fields()[1]);
        }
    }
    TsvReader index(dir / "index.tsv");
    while (index.next()) {
        index.expect_fields(3);
        const std::string id = index.fields()[0];
        const long long label = index.integer(1);
        if (label < 0 || static_cast<std::size_t>(label) >= out.class_names.size()) {
            throw IndexError(index.path() + ":" + std::to_string(index.line()) +
                             ": class id " + std::to_string(label) + " is not in classes.tsv");
        }
        const std::string split = index.fields()[2];
        if (split != "train" && split != "val" && split != "test" && split != "none") {
            index.fail("unknown split '" + split + "'");
        }
        std::vector<double> values;
        TsvReader f(dir / (id + ".features.tsv"));
        while (f.next()) {
            f.expect_fields(4);
            for (std::size_t c = 1; c < 4; ++c) {
                values.push_back(f.real(c));
            }
        }
        const std::size_t points = values.size() / 3;
        if (points == 0) {
            throw DataError((dir / (id + ".features.tsv")).string() + ": no points");
        }
        TsvReader l(dir / (id + ".labels.tsv"));
        std::size_t label_lines = 0;
        while (l.next()) {
            l.expect_fields(2);
            if (l.integer(1) != label) {
                l.fail("point label disagrees with index.tsv");
            }
            ++label_lines;
        }
        if (label_lines != points) {
            throw DataError((dir / (id + ".labels.tsv")).string() + ": " +
                            std::to_string(label_lines) + " labels for " +
                            std::to_string(points) + " points");
        }
        out.instances.push_back({DenseMatrix(points, 3, std::move(values)), static_cast<int>(label)});
        out.train.push_back(split == "train");
        out.val.push_back(split == "val");
        out.test.push_back(split == "test");
    }
    return out;
}

} // namespace jlgcn
