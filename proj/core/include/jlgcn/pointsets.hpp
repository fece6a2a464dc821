#ifndef JLGCN_POINTSETS_HPP
#define JLGCN_POINTSETS_HPP

#include "jlgcn/loss.hpp"
#include "jlgcn/matrix.hpp"
#include "jlgcn/rng.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace jlgcn {

enum class ShapeFamily { sphere_shell, cube_surface, plane_disk, two_cluster, helix, torus };

std::string_view to_string(ShapeFamily f);
/// Accepts the names printed by to_string(), with '-' or '_'.
ShapeFamily parse_shape_family(std::string_view s);
const std::vector<ShapeFamily>& all_shape_families();

struct PointSet {
    DenseMatrix points;  ///< N x 3
    int label = 0;
};

/// Labeled point sets with disjoint instance splits.
///
/// On disk (save_pointsets / load_pointsets):
///
///   classes.tsv             class-id <TAB> family name
///   index.tsv               instance-id <TAB> class-id <TAB> train|val|test|none
///   <instance-id>.features.tsv   point-id <TAB> x <TAB> y <TAB> z
///   <instance-id>.labels.tsv     point-id <TAB> class-id
struct PointSetCollection {
    std::vector<std::string> class_names;
    std::vector<PointSet> instances;
    Mask train;
    Mask val;
    Mask test;

    std::size_t num_classes() const noexcept { return class_names.size(); }
};

/// `per_class` instances of each family, `points` points each, sampled
/// uniformly on the shape, perturbed by N(0, noise^2) per coordinate, then
/// centered on the bounding-box midpoint and scaled so the largest point
/// norm is 1. Class k is families[k]. Splits are left empty.
PointSetCollection synth_pointsets(const std::vector<ShapeFamily>& families,
                                   std::size_t per_class, std::size_t points, double noise,
                                   Rng& rng);

/// Stratified split: in each class, round(test_fraction * count) instances
/// go to test, round(val_fraction * count) to val, the rest to train.
void split_pointsets(PointSetCollection& collection, double test_fraction, double val_fraction,
                     Rng& rng);

/// Removes floor(ratio * N) uniformly chosen points (at least one point is kept).
DenseMatrix drop_points(const DenseMatrix& points, double ratio, Rng& rng);

void save_pointsets(const PointSetCollection& collection, const std::filesystem::path& dir);
PointSetCollection load_pointsets(const std::filesystem::path& dir);

} // namespace jlgcn

#endif // JLGCN_POINTSETS_HPP
