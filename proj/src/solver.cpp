#include "bcx/solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "bcx/error.hpp"

namespace bcx {

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t r = 0; r < rows; ++r) {
        double sum = 0.0;
        for (auto k = row_offsets[r]; k < row_offsets[r + 1]; ++k) sum += values[k] * x[columns[k]];
        y[r] = sum;
    }
}

double CsrMatrix::at(std::size_t row, std::size_t col) const {
    const auto begin = columns.begin() + row_offsets[row];
    const auto end = columns.begin() + row_offsets[row + 1];
    const auto it = std::lower_bound(begin, end, static_cast<std::int32_t>(col));
    return (it != end && *it == static_cast<std::int32_t>(col)) ? values[it - columns.begin()] : 0.0;
}

double CsrMatrix::max_asymmetry() const {
    double worst = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        for (auto k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
            worst = std::max(worst, std::abs(values[k] - at(columns[k], r)));
        }
    }
    return worst;
}

namespace {

CsrMatrix build_pattern(const Mesh& mesh) {
    const std::size_t n = mesh.nodes.size();
    std::vector<std::vector<std::int32_t>> adj(n);
    for (const auto& t : mesh.triangles) {
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) adj[t[a]].push_back(t[b]);
        }
    }
    CsrMatrix m;
    m.rows = n;
    m.row_offsets.assign(n + 1, 0);
    for (std::size_t r = 0; r < n; ++r) {
        auto& row = adj[r];
        row.push_back(static_cast<std::int32_t>(r));
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        m.row_offsets[r + 1] = m.row_offsets[r] + static_cast<std::int64_t>(row.size());
        m.columns.insert(m.columns.end(), row.begin(), row.end());
    }
    m.values.assign(m.columns.size(), 0.0);
    return m;
}

void add_entry(CsrMatrix& m, std::int32_t row, std::int32_t col, double v) {
    const auto begin = m.columns.begin() + m.row_offsets[row];
    const auto end = m.columns.begin() + m.row_offsets[row + 1];
    const auto it = std::lower_bound(begin, end, col);
    m.values[it - m.columns.begin()] += v;
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::vector<double> mass_times(const Mesh& mesh, std::span<const double> v) {
    std::vector<double> out(mesh.nodes.size(), 0.0);
    for (const auto& t : mesh.triangles) {
        const double area = signed_area(mesh, t);
        const double sum = v[t[0]] + v[t[1]] + v[t[2]];
        // M_ii = A/6, M_ij = A/12  =>  (M v)_i = A/12 (v_i + sum)
        for (int a = 0; a < 3; ++a) out[t[a]] += area / 12.0 * (v[t[a]] + sum);
    }
    return out;
}

}  // namespace

SparseSystem assemble_poisson(const Mesh& mesh, std::span<const double> f, const RawBoundarySpec& spec) {
    const std::size_t n = mesh.nodes.size();
    const std::size_t b = mesh.boundary_loop.size();
    if (f.size() != n) throw std::invalid_argument("assemble_poisson: source length differs from node count");
    if (spec.size() != b) throw std::invalid_argument("assemble_poisson: boundary spec length differs from loop length");
    if (!spec.has_dirichlet()) throw std::invalid_argument("assemble_poisson: spec has no Dirichlet node");
    if (!all_finite(f) || !all_finite(spec.gamma_d) || !all_finite(spec.gamma_n) || !all_finite(spec.gamma_r) ||
        !all_finite(spec.alpha_r)) {
        throw std::invalid_argument("assemble_poisson: non-finite input");
    }

    SparseSystem sys;
    sys.matrix = build_pattern(mesh);
    for (const auto& t : mesh.triangles) {
        const double area = signed_area(mesh, t);
        std::array<Point, 3> e;
        for (int a = 0; a < 3; ++a) e[a] = mesh.nodes[t[(a + 2) % 3]] - mesh.nodes[t[(a + 1) % 3]];
        for (int a = 0; a < 3; ++a) {
            for (int c = 0; c < 3; ++c) add_entry(sys.matrix, t[a], t[c], dot(e[a], e[c]) / (4.0 * area));
        }
    }
    sys.rhs = mass_times(mesh, f);

    for (std::size_t j = 0; j < b; ++j) {
        const std::size_t k = (j + 1) % b;
        const double half = 0.5 * distance(mesh.nodes[mesh.boundary_loop[j]], mesh.nodes[mesh.boundary_loop[k]]);
        for (std::size_t m : {j, k}) {
            const auto node = mesh.boundary_loop[m];
            if (spec.types[m] == BcType::neumann) {
                sys.rhs[node] += half * spec.gamma_n[m];
            } else if (spec.types[m] == BcType::robin) {
                add_entry(sys.matrix, node, node, half * spec.alpha_r[m]);
                sys.rhs[node] += half * spec.gamma_r[m];
            }
        }
    }
    for (std::size_t j = 0; j < b; ++j) {
        if (spec.types[j] == BcType::dirichlet) {
            sys.constrained.push_back(mesh.boundary_loop[j]);
            sys.prescribed.push_back(spec.gamma_d[j]);
        }
    }
    return sys;
}

CgResult solve_cg_detailed(const SparseSystem& system, const CgOptions& options) {
    const auto& a = system.matrix;
    const std::size_t n = a.rows;
    std::vector<char> fixed(n, 0);
    CgResult result;
    result.solution.assign(n, 0.0);
    auto& x = result.solution;
    for (std::size_t c = 0; c < system.constrained.size(); ++c) {
        fixed[system.constrained[c]] = 1;
        x[system.constrained[c]] = system.prescribed[c];
    }
    std::vector<double> r(n), z(n), p(n), ap(n), diag(n);
    a.multiply(x, ap);
    for (std::size_t i = 0; i < n; ++i) {
        r[i] = fixed[i] ? 0.0 : system.rhs[i] - ap[i];
        diag[i] = a.at(i, i);
    }
    auto dotp = [n](const std::vector<double>& u, const std::vector<double>& v) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += u[i] * v[i];
        return s;
    };
    const double r0 = std::sqrt(dotp(r, r));
    if (r0 == 0.0) return result;
    for (std::size_t i = 0; i < n; ++i) {
        if (!fixed[i] && !(diag[i] > 0.0)) {
            throw SolverError("solve_cg: non-positive diagonal at node " + std::to_string(i));
        }
        z[i] = fixed[i] ? 0.0 : r[i] / diag[i];
    }
    p = z;
    double rz = dotp(r, z);
    double rel = 1.0;
    for (int it = 1; it <= options.max_iter; ++it) {
        a.multiply(p, ap);
        for (std::size_t i = 0; i < n; ++i) {
            if (fixed[i]) ap[i] = 0.0;
        }
        const double pap = dotp(p, ap);
        if (!(pap > 0.0)) {
            throw SolverError("solve_cg: matrix not positive definite on the free nodes", rel, it);
        }
        const double alpha = rz / pap;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = std::sqrt(dotp(r, r)) / r0;
        result.iterations = it;
        result.relative_residual = rel;
        if (rel <= options.tol) return result;
        for (std::size_t i = 0; i < n; ++i) z[i] = fixed[i] ? 0.0 : r[i] / diag[i];
        const double rz_new = dotp(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    throw SolverError("solve_cg: no convergence after " + std::to_string(options.max_iter) +
                          " iterations (relative residual " + std::to_string(rel) + ")",
                      rel, options.max_iter);
}

ScalarField solve_cg(const SparseSystem& system, double tol, int max_iter) {
    return solve_cg_detailed(system, CgOptions{tol, max_iter}).solution;
}

ScalarField solve_poisson(const Mesh& mesh, std::span<const double> f, const RawBoundarySpec& spec,
                          const CgOptions& options) {
    return solve_cg_detailed(assemble_poisson(mesh, f, spec), options).solution;
}

ScalarField harmonic_extension(const Mesh& mesh, std::span<const double> boundary_values, const CgOptions& options) {
    if (boundary_values.size() != mesh.boundary_loop.size()) {
        throw std::invalid_argument("harmonic_extension: expected one value per boundary node");
    }
    RawBoundarySpec spec = uniform_spec(boundary_values.size(), BcType::dirichlet);
    spec.gamma_d.assign(boundary_values.begin(), boundary_values.end());
    const std::vector<double> zero(mesh.nodes.size(), 0.0);
    return solve_poisson(mesh, zero, spec, options);
}

ScalarField solve_auxiliary(const Mesh& mesh, std::span<const double> f, const RawBoundarySpec& spec,
                            std::span<const double> psi, const CgOptions& options) {
    if (psi.size() != mesh.nodes.size()) throw std::invalid_argument("solve_auxiliary: psi length differs from node count");
    SparseSystem sys = assemble_poisson(mesh, f, spec);
    // rhs - A psi carries the weak Laplacian of psi and the boundary flux that
    // psi inherits from the boundary data it satisfies.
    std::vector<double> apsi(psi.size());
    sys.matrix.multiply(psi, apsi);
    for (std::size_t i = 0; i < apsi.size(); ++i) sys.rhs[i] -= apsi[i];
    std::fill(sys.prescribed.begin(), sys.prescribed.end(), 0.0);
    return solve_cg_detailed(sys, options).solution;
}

double superposition_check(const Mesh& mesh, std::span<const double> f, const RawBoundarySpec& spec,
                           std::span<const double> psi, const CgOptions& options) {
    const ScalarField u = solve_poisson(mesh, f, spec, options);
    const ScalarField w = solve_auxiliary(mesh, f, spec, psi, options);
    std::vector<double> diff(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) diff[i] = u[i] - (w[i] + psi[i]);
    const double un = l2_norm(mesh, u);
    const double dn = l2_norm(mesh, diff);
    if (un == 0.0) return dn == 0.0 ? 0.0 : dn;
    return dn / un;
}

double affinity_check(const Mesh& mesh, std::span<const double> f, const RawBoundarySpec& spec,
                      std::span<const double> psi1, std::span<const double> psi2, double lambda,
                      const CgOptions& options) {
    std::vector<double> mix(psi1.size());
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = lambda * psi1[i] + (1.0 - lambda) * psi2[i];
    const ScalarField w1 = solve_auxiliary(mesh, f, spec, psi1, options);
    const ScalarField w2 = solve_auxiliary(mesh, f, spec, psi2, options);
    const ScalarField wm = solve_auxiliary(mesh, f, spec, mix, options);
    std::vector<double> diff(mix.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = wm[i] - lambda * w1[i] - (1.0 - lambda) * w2[i];
    return l2_norm(mesh, diff) / (1.0 + l2_norm(mesh, w1) + l2_norm(mesh, w2));
}

double l2_norm(const Mesh& mesh, std::span<const double> field) {
    const auto mv = mass_times(mesh, field);
    double s = 0.0;
    for (std::size_t i = 0; i < mv.size(); ++i) s += field[i] * mv[i];
    return std::sqrt(std::max(s, 0.0));
}

namespace {

// Degree-5 seven-point rule on the reference triangle (barycentric, weights sum to 1).
struct QuadPoint {
    double l0, l1, l2, w;
};

constexpr double qa1 = 0.059715871789770, qb1 = 0.470142064105115, qw1 = 0.132394152788506;
constexpr double qa2 = 0.797426985353087, qb2 = 0.101286507323456, qw2 = 0.125939180544827;

constexpr std::array<QuadPoint, 7> quad_rule{{
    {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.225},
    {qa1, qb1, qb1, qw1},
    {qb1, qa1, qb1, qw1},
    {qb1, qb1, qa1, qw1},
    {qa2, qb2, qb2, qw2},
    {qb2, qa2, qb2, qw2},
    {qb2, qb2, qa2, qw2},
}};

template <class Integrand>
double integrate(const Mesh& mesh, Integrand&& g) {
    double total = 0.0;
    for (const auto& t : mesh.triangles) {
        const double area = signed_area(mesh, t);
        const Point p0 = mesh.nodes[t[0]], p1 = mesh.nodes[t[1]], p2 = mesh.nodes[t[2]];
        for (const auto& q : quad_rule) {
            const Point x = q.l0 * p0 + q.l1 * p1 + q.l2 * p2;
            total += area * q.w * g(t, q, x);
        }
    }
    return total;
}

}  // namespace

double l2_error(const Mesh& mesh, std::span<const double> field, const std::function<double(Point)>& exact) {
    const double s = integrate(mesh, [&](const Triangle& t, const QuadPoint& q, Point x) {
        const double uh = q.l0 * field[t[0]] + q.l1 * field[t[1]] + q.l2 * field[t[2]];
        const double e = uh - exact(x);
        return e * e;
    });
    return std::sqrt(std::max(s, 0.0));
}

double l2_norm(const Mesh& mesh, const std::function<double(Point)>& exact) {
    return std::sqrt(integrate(mesh, [&](const Triangle&, const QuadPoint&, Point x) {
        const double v = exact(x);
        return v * v;
    }));
}

}  // namespace bcx
