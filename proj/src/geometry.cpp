#include "bcx/geometry.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>

#include "bcx/error.hpp"

namespace bcx {

std::vector<Point> Mesh::boundary_points() const {
    std::vector<Point> out;
    out.reserve(boundary_loop.size());
    for (auto i : boundary_loop) out.push_back(nodes[i]);
    return out;
}

std::vector<double> Mesh::loop_arclengths() const {
    std::vector<double> s(boundary_loop.size(), 0.0);
    for (std::size_t j = 1; j < boundary_loop.size(); ++j) {
        s[j] = s[j - 1] + distance(nodes[boundary_loop[j - 1]], nodes[boundary_loop[j]]);
    }
    return s;
}

double Mesh::perimeter() const {
    double total = 0.0;
    const std::size_t b = boundary_loop.size();
    for (std::size_t j = 0; j < b; ++j) {
        total += distance(nodes[boundary_loop[j]], nodes[boundary_loop[(j + 1) % b]]);
    }
    return total;
}

std::vector<std::int32_t> Mesh::boundary_position() const {
    std::vector<std::int32_t> pos(nodes.size(), -1);
    for (std::size_t j = 0; j < boundary_loop.size(); ++j) pos[boundary_loop[j]] = static_cast<std::int32_t>(j);
    return pos;
}

double signed_area(const Mesh& mesh, const Triangle& t) {
    const Point a = mesh.nodes[t[0]];
    return 0.5 * cross(mesh.nodes[t[1]] - a, mesh.nodes[t[2]] - a);
}

double total_area(const Mesh& mesh) {
    double area = 0.0;
    for (const auto& t : mesh.triangles) area += signed_area(mesh, t);
    return area;
}

namespace {

void finish_mesh(Mesh& mesh) {
    mesh.boundary_normals = boundary_normals(mesh);
    mesh.sdf = signed_distance(mesh);
}

}  // namespace

Mesh make_rectangle_mesh(int nx, int ny) {
    if (nx < 2 || ny < 2 || nx * ny < 5) {
        throw std::invalid_argument("make_rectangle_mesh: need at least 2 nodes per side and an interior, got " +
                                    std::to_string(nx) + "x" + std::to_string(ny));
    }
    Mesh mesh;
    mesh.nodes.reserve(static_cast<std::size_t>(nx) * ny);
    const double hx = 2.0 / (nx - 1);
    const double hy = 2.0 / (ny - 1);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            // Pin the last grid line to exactly +1.
            const double x = (i == nx - 1) ? 1.0 : -1.0 + i * hx;
            const double y = (j == ny - 1) ? 1.0 : -1.0 + j * hy;
            mesh.nodes.push_back({x, y});
        }
    }
    auto id = [nx](int i, int j) { return static_cast<std::int32_t>(i + j * nx); };
    for (int j = 0; j + 1 < ny; ++j) {
        for (int i = 0; i + 1 < nx; ++i) {
            mesh.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            mesh.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    for (int i = 0; i < nx - 1; ++i) mesh.boundary_loop.push_back(id(i, 0));
    for (int j = 0; j < ny - 1; ++j) mesh.boundary_loop.push_back(id(nx - 1, j));
    for (int i = nx - 1; i > 0; --i) mesh.boundary_loop.push_back(id(i, ny - 1));
    for (int j = ny - 1; j > 0; --j) mesh.boundary_loop.push_back(id(0, j));
    finish_mesh(mesh);
    return mesh;
}

Mesh make_square_mesh(int n) {
    if (n < 3) throw std::invalid_argument("make_square_mesh: n_per_side must be >= 3, got " + std::to_string(n));
    return make_rectangle_mesh(n, n);
}

Mesh make_disk_mesh(int n_rings) {
    if (n_rings < 2) throw std::invalid_argument("make_disk_mesh: n_rings must be >= 2, got " + std::to_string(n_rings));
    Mesh mesh;
    std::vector<std::int32_t> ring_start;
    for (int k = 0; k <= n_rings; ++k) {
        ring_start.push_back(static_cast<std::int32_t>(mesh.nodes.size()));
        const int count = std::max(1, 6 * k);
        const double r = (k == n_rings) ? 1.0 : static_cast<double>(k) / n_rings;
        for (int m = 0; m < count; ++m) {
            const double theta = 2.0 * std::numbers::pi * m / count;
            mesh.nodes.push_back(k == 0 ? Point{0.0, 0.0} : Point{r * std::cos(theta), r * std::sin(theta)});
        }
    }
    auto push_ccw = [&mesh](std::int32_t a, std::int32_t b, std::int32_t c) {
        Triangle t{a, b, c};
        if (signed_area(mesh, t) < 0.0) std::swap(t[1], t[2]);
        mesh.triangles.push_back(t);
    };
    for (int k = 0; k < n_rings; ++k) {
        const int p = std::max(1, 6 * k);
        const int q = 6 * (k + 1);
        const std::int32_t a0 = ring_start[k];
        const std::int32_t b0 = ring_start[k + 1];
        if (k == 0) {
            for (int j = 0; j < q; ++j) push_ccw(a0, b0 + j, b0 + (j + 1) % q);
            continue;
        }
        // Angular sweep: advance whichever ring has the smaller next angle.
        int i = 0;
        int j = 0;
        while (i < p || j < q) {
            const bool outer = (j < q) && (i == p || static_cast<long>(j + 1) * p <= static_cast<long>(i + 1) * q);
            if (outer) {
                push_ccw(a0 + i % p, b0 + j % q, b0 + (j + 1) % q);
                ++j;
            } else {
                push_ccw(a0 + i % p, b0 + j % q, a0 + (i + 1) % p);
                ++i;
            }
        }
    }
    const int outer = 6 * n_rings;
    for (int m = 0; m < outer; ++m) mesh.boundary_loop.push_back(ring_start[n_rings] + m);
    finish_mesh(mesh);
    return mesh;
}

Mesh make_mesh(Geometry geometry, int resolution) {
    return geometry == Geometry::square ? make_square_mesh(resolution) : make_disk_mesh(resolution);
}

namespace {

double point_segment_distance(Point p, Point a, Point b) {
    const Point ab = b - a;
    const double len2 = dot(ab, ab);
    double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return distance(p, a + t * ab);
}

}  // namespace

std::vector<double> signed_distance(const Mesh& mesh) {
    const auto pos = mesh.boundary_position();
    const auto pts = mesh.boundary_points();
    const std::size_t b = pts.size();
    std::vector<double> sdf(mesh.nodes.size(), 0.0);
    for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
        if (pos[i] >= 0) continue;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < b; ++j) {
            best = std::min(best, point_segment_distance(mesh.nodes[i], pts[j], pts[(j + 1) % b]));
        }
        sdf[i] = -best;
    }
    return sdf;
}

std::vector<Point> boundary_normals(const Mesh& mesh) {
    const auto pts = mesh.boundary_points();
    const std::size_t b = pts.size();
    std::vector<Point> edge_normals(b);
    for (std::size_t j = 0; j < b; ++j) {
        const Point t = pts[(j + 1) % b] - pts[j];
        const double len = norm(t);
        edge_normals[j] = {t.y / len, -t.x / len};
    }
    std::vector<Point> normals(b);
    for (std::size_t j = 0; j < b; ++j) {
        const Point n = edge_normals[(j + b - 1) % b] + edge_normals[j];
        const double len = norm(n);
        normals[j] = {n.x / len, n.y / len};
    }
    return normals;
}

CoarseMap farthest_point_subsample(const Mesh& mesh, int count, std::uint64_t seed) {
    const std::size_t n = mesh.nodes.size();
    if (count < 1 || static_cast<std::size_t>(count) > n) {
        throw std::invalid_argument("farthest_point_subsample: count " + std::to_string(count) + " outside [1, " +
                                    std::to_string(n) + "]");
    }
    CoarseMap map;
    map.coarse_nodes.reserve(count);
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    auto next = static_cast<std::int32_t>(seed % n);
    for (int c = 0; c < count; ++c) {
        map.coarse_nodes.push_back(next);
        const Point p = mesh.nodes[next];
        std::int32_t best = -1;
        double best_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            dist[i] = std::min(dist[i], distance(mesh.nodes[i], p));
            if (dist[i] > best_d) {
                best_d = dist[i];
                best = static_cast<std::int32_t>(i);
            }
        }
        next = best;
    }
    map.assign.assign(n, 0);
    map.radii.assign(count, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double best_d = std::numeric_limits<double>::infinity();
        std::int32_t best = 0;
        for (int c = 0; c < count; ++c) {
            const double d = distance(mesh.nodes[i], mesh.nodes[map.coarse_nodes[c]]);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        map.assign[i] = best;
        map.radii[best] = std::max(map.radii[best], best_d);
    }
    return map;
}

void validate_mesh(const Mesh& mesh) {
    auto fail = [](const std::string& msg) { throw DataError(DataError::Kind::manifest, "invalid mesh: " + msg); };
    const auto n = static_cast<std::int32_t>(mesh.nodes.size());
    if (n < 3) fail("fewer than 3 nodes");
    for (const auto& t : mesh.triangles) {
        for (auto v : t) {
            if (v < 0 || v >= n) fail("triangle index out of range");
        }
        if (!(signed_area(mesh, t) > 0.0)) fail("triangle with non-positive area");
    }
    std::vector<int> seen(n, 0);
    for (auto v : mesh.boundary_loop) {
        if (v < 0 || v >= n) fail("boundary index out of range");
        if (seen[v]++) fail("boundary node repeated in loop");
    }
    if (mesh.boundary_normals.size() != mesh.boundary_loop.size()) fail("normal count differs from loop length");
    if (mesh.sdf.size() != mesh.nodes.size()) fail("sdf length differs from node count");
    // Edge multiplicities: loop edges once, interior edges twice.
    std::map<std::pair<std::int32_t, std::int32_t>, int> edges;
    for (const auto& t : mesh.triangles) {
        for (int e = 0; e < 3; ++e) {
            auto a = t[e], b = t[(e + 1) % 3];
            edges[{std::min(a, b), std::max(a, b)}]++;
        }
    }
    const std::size_t b = mesh.boundary_loop.size();
    std::size_t loop_edges = 0;
    for (std::size_t j = 0; j < b; ++j) {
        auto a = mesh.boundary_loop[j], c = mesh.boundary_loop[(j + 1) % b];
        auto it = edges.find({std::min(a, c), std::max(a, c)});
        if (it == edges.end() || it->second != 1) fail("boundary loop edge not on exactly one triangle");
        ++loop_edges;
    }
    std::size_t single = 0;
    for (const auto& [e, count] : edges) {
        if (count == 1) ++single;
        else if (count != 2) fail("edge shared by more than two triangles");
    }
    if (single != loop_edges) fail("open edges outside the boundary loop");
}

}  // namespace bcx
