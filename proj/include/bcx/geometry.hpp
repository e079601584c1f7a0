#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace bcx {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
    friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
    friend Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Point a, Point b) = default;
};

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }
inline double distance(Point a, Point b) { return norm(a - b); }

enum class Geometry { square, disk };

using Triangle = std::array<std::int32_t, 3>;

// Discrete domain. Triangles are counter-clockwise, the boundary loop traces
// the boundary counter-clockwise, sdf is negative inside and 0 on the loop.
struct Mesh {
    std::vector<Point> nodes;
    std::vector<Triangle> triangles;
    std::vector<std::int32_t> boundary_loop;
    std::vector<Point> boundary_normals;
    std::vector<double> sdf;

    std::size_t node_count() const { return nodes.size(); }
    std::size_t boundary_count() const { return boundary_loop.size(); }
    std::vector<Point> boundary_points() const;
    // Cumulative arc length of each loop node, starting at 0 for loop[0].
    std::vector<double> loop_arclengths() const;
    double perimeter() const;
    // -1 for interior nodes, loop position otherwise.
    std::vector<std::int32_t> boundary_position() const;
};

double signed_area(const Mesh& mesh, const Triangle& t);
double total_area(const Mesh& mesh);

Mesh make_square_mesh(int n_per_side);
// Uniform nx-by-ny grid on [-1,1]^2; make_square_mesh(n) is the n-by-n case.
Mesh make_rectangle_mesh(int nx, int ny);
Mesh make_disk_mesh(int n_rings);
Mesh make_mesh(Geometry geometry, int resolution);

// Negative distance to the polygonal boundary; exactly 0 on boundary nodes.
std::vector<double> signed_distance(const Mesh& mesh);

// Outward unit normals at loop vertices (normalized mean of adjacent edge normals).
std::vector<Point> boundary_normals(const Mesh& mesh);

struct CoarseMap {
    std::vector<std::int32_t> coarse_nodes;
    std::vector<std::int32_t> assign;  // fine node -> position in coarse_nodes
    std::vector<double> radii;
};

// Farthest point sampling starting at node (seed mod node_count). Ties go to the
// lowest node index; fine nodes are assigned to the nearest coarse node, ties
// to the lowest coarse position.
CoarseMap farthest_point_subsample(const Mesh& mesh, int count, std::uint64_t seed);

// Structural checks used by tests and by read_dataset. Throws DataError.
void validate_mesh(const Mesh& mesh);

}  // namespace bcx
