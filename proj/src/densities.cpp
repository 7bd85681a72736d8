#include "weylma/densities.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>

#include "weylma/util.hpp"

namespace weylma {

// Recursive-descent parser over: expr := term (('+'|'-') term)*,
// term := unary ('*' unary)*, unary := '-' unary | power,
// power := atom ('^' uint)?, atom := number | r2 | p2 | '(' expr ')'.
namespace {

class ExprParser {
 public:
  explicit ExprParser(const std::string& text) : text_(text) {}

  // Node construction shared with InvariantExpr via plain arrays.
  struct Out {
    std::vector<char> kind;
    std::vector<double> value;
    std::vector<int> a, b, exponent;
    int add(char k, double v = 0.0, int x = -1, int y = -1, int e = 1) {
      kind.push_back(k);
      value.push_back(v);
      a.push_back(x);
      b.push_back(y);
      exponent.push_back(e);
      return static_cast<int>(kind.size()) - 1;
    }
  };

  int run(Out& out) {
    out_ = &out;
    const int root = parse_expr();
    skip_ws();
    if (pos_ != text_.size())
      throw std::invalid_argument("u expression: trailing input at '" +
                                  text_.substr(pos_) + "'");
    return root;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool consume(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  int parse_expr() {
    int node = parse_term();
    while (true) {
      if (consume('+'))
        node = out_->add('+', 0.0, node, parse_term());
      else if (consume('-'))
        node = out_->add('-', 0.0, node, parse_term());
      else
        return node;
    }
  }

  int parse_term() {
    int node = parse_unary();
    while (consume('*')) node = out_->add('*', 0.0, node, parse_unary());
    return node;
  }

  int parse_unary() {
    if (consume('-')) return out_->add('n', 0.0, parse_unary());
    return parse_power();
  }

  int parse_power() {
    int node = parse_atom();
    if (consume('^')) {
      skip_ws();
      std::size_t start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
        ++pos_;
      if (pos_ == start)
        throw std::invalid_argument("u expression: expected integer exponent");
      const int e = std::stoi(text_.substr(start, pos_ - start));
      node = out_->add('^', 0.0, node, -1, e);
    }
    return node;
  }

  int parse_atom() {
    skip_ws();
    if (consume('(')) {
      int node = parse_expr();
      if (!consume(')'))
        throw std::invalid_argument("u expression: missing ')'");
      return node;
    }
    if (text_.compare(pos_, 2, "r2") == 0) {
      pos_ += 2;
      return out_->add('r');
    }
    if (text_.compare(pos_, 2, "p2") == 0) {
      pos_ += 2;
      return out_->add('p');
    }
    // number
    std::size_t consumed = 0;
    double v = 0.0;
    try {
      v = std::stod(text_.substr(pos_), &consumed);
    } catch (const std::exception&) {
      throw std::invalid_argument("u expression: expected number at '" +
                                  text_.substr(pos_) + "'");
    }
    pos_ += consumed;
    return out_->add('c', v);
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  Out* out_ = nullptr;
};

}  // namespace

InvariantExpr InvariantExpr::zero() { return InvariantExpr{}; }

InvariantExpr InvariantExpr::parse(const std::string& text) {
  std::string trimmed;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) trimmed += c;
  if (trimmed.empty() || trimmed == "zero" || trimmed == "0")
    return InvariantExpr::zero();

  ExprParser parser(text);
  ExprParser::Out out;
  const int root = parser.run(out);

  InvariantExpr e;
  e.text_ = text;
  e.root_ = root;
  e.nodes_.resize(out.kind.size());
  for (std::size_t i = 0; i < out.kind.size(); ++i) {
    Node& n = e.nodes_[i];
    switch (out.kind[i]) {
      case 'c': n.kind = Node::kConst; break;
      case 'r': n.kind = Node::kR2; break;
      case 'p': n.kind = Node::kP2; break;
      case '+': n.kind = Node::kAdd; break;
      case '-': n.kind = Node::kSub; break;
      case '*': n.kind = Node::kMul; break;
      case 'n': n.kind = Node::kNeg; break;
      case '^': n.kind = Node::kPow; break;
      default: throw std::logic_error("unreachable");
    }
    n.value = out.value[i];
    n.a = out.a[i];
    n.b = out.b[i];
    n.exponent = out.exponent[i];
  }
  return e;
}

double InvariantExpr::eval_node(int idx, double r2, double p2) const {
  const Node& n = nodes_[static_cast<std::size_t>(idx)];
  switch (n.kind) {
    case Node::kConst: return n.value;
    case Node::kR2: return r2;
    case Node::kP2: return p2;
    case Node::kAdd: return eval_node(n.a, r2, p2) + eval_node(n.b, r2, p2);
    case Node::kSub: return eval_node(n.a, r2, p2) - eval_node(n.b, r2, p2);
    case Node::kMul: return eval_node(n.a, r2, p2) * eval_node(n.b, r2, p2);
    case Node::kNeg: return -eval_node(n.a, r2, p2);
    case Node::kPow: return std::pow(eval_node(n.a, r2, p2), n.exponent);
  }
  return 0.0;
}

double InvariantExpr::eval(double r2, double p2) const {
  if (is_zero()) return 0.0;
  return eval_node(root_, r2, p2);
}

// --- density spec ----------------------------------------------------------

DensitySpec::DensitySpec(RootSystem rs, InvariantExpr u, double regularization,
                         double overflow_radius)
    : rs_(std::move(rs)),
      u_(std::move(u)),
      eps_(regularization),
      overflow_radius_(overflow_radius) {
  if (eps_ < 0.0)
    throw std::invalid_argument("DensitySpec: regularization must be >= 0");
  if (overflow_radius_ <= 0.0 || overflow_radius_ > 700.0)
    throw std::invalid_argument("DensitySpec: overflow radius out of range");
}

DensitySpec DensitySpec::with_regularization(double eps) const {
  return DensitySpec(rs_, u_, eps, overflow_radius_);
}

double DensitySpec::u_value(const Vec& x) const {
  if (u_.is_zero()) return 0.0;
  double p2 = 1.0;
  for (const Vec& a : rs_.positive_roots()) {
    const double av = a.dot(x);
    p2 *= av * av;
  }
  return u_.eval(x.squaredNorm(), p2);
}

double DensitySpec::source_density(const Vec& x) const {
  double prod = 1.0;
  double p2 = 1.0;
  for (const Vec& a : rs_.positive_roots()) {
    const double av = a.dot(x);
    if (std::abs(av) > overflow_radius_)
      throw std::domain_error("source_density: |a(x)| beyond overflow radius");
    const double sh = std::sinh(av);
    prod *= sh * sh;
    p2 *= av * av;
  }
  const double uval = u_.is_zero() ? 0.0 : u_.eval(x.squaredNorm(), p2);
  return std::exp(uval) * prod + eps_;
}

double DensitySpec::target_density(const Vec& y) const {
  double p2 = 1.0;
  for (const Vec& a : rs_.positive_roots()) {
    const double av = a.dot(y);
    p2 *= av * av;
  }
  return p2 + eps_;
}

// --- ball quadrature --------------------------------------------------------

namespace {

constexpr long kCellCap = 200'000'000;

double ball_mass_impl(const DensityFn& density, int dim, double radius,
                      int resolution, long* cells_out) {
  const double h = 2.0 * radius / resolution;
  const double r2 = radius * radius;
  long cells = 0;
  Vec x(dim);
  std::vector<double> partials;  // one partial per outer slice, summed pairwise
  std::vector<double> row;
  row.reserve(static_cast<std::size_t>(resolution));

  // Mixed-radix counter over all but the innermost axis.
  std::vector<int> idx(static_cast<std::size_t>(dim > 1 ? dim - 1 : 0), 0);
  bool done = false;
  while (!done) {
    row.clear();
    double outer2 = 0.0;
    for (int d = 0; d < dim - 1; ++d) {
      x[d] = -radius + (idx[static_cast<std::size_t>(d)] + 0.5) * h;
      outer2 += x[d] * x[d];
    }
    if (outer2 <= r2) {
      for (int i = 0; i < resolution; ++i) {
        const double c = -radius + (i + 0.5) * h;
        if (outer2 + c * c <= r2) {
          x[dim - 1] = c;
          row.push_back(density(x));
          ++cells;
        }
      }
    }
    partials.push_back(pairwise_sum(row));
    if (dim == 1) break;
    int d = dim - 2;
    while (d >= 0) {
      if (++idx[static_cast<std::size_t>(d)] < resolution) break;
      idx[static_cast<std::size_t>(d)] = 0;
      --d;
    }
    done = (d < 0);
  }
  if (cells_out) *cells_out = cells;
  return std::pow(h, dim) * pairwise_sum(partials);
}

}  // namespace

double ball_mass_plain(const DensityFn& density, int dim, double radius,
                       int resolution) {
  if (!(radius > 0.0)) throw std::invalid_argument("ball_mass: radius <= 0");
  double cells_estimate = std::pow(static_cast<double>(resolution), dim);
  if (cells_estimate > static_cast<double>(kCellCap))
    throw std::invalid_argument("ball_mass: resolution overflow (cell cap)");
  return ball_mass_impl(density, dim, radius, resolution, nullptr);
}

MassReport ball_mass(const DensityFn& density, int dim, double radius,
                     int resolution) {
  if (resolution < 16)
    throw std::invalid_argument("ball_mass: resolution must be >= 16");
  MassReport report;
  report.radius = radius;
  long cells = 0;
  if (!(radius > 0.0)) throw std::invalid_argument("ball_mass: radius <= 0");
  double cells_estimate = std::pow(static_cast<double>(resolution), dim);
  if (cells_estimate > static_cast<double>(kCellCap))
    throw std::invalid_argument("ball_mass: resolution overflow (cell cap)");
  report.mass = ball_mass_impl(density, dim, radius, resolution, &cells);
  report.quadrature_cells = cells;
  const double coarse =
      ball_mass_impl(density, dim, radius, resolution / 2, nullptr);
  // Midpoint rule is O(h^2) on smooth integrands; one halving step gives the
  // Richardson error estimate.
  report.estimated_error = std::abs(report.mass - coarse) / 3.0;
  return report;
}

int default_balance_resolution(int dim) {
  switch (dim) {
    case 1: return 8192;
    case 2: return 512;
    default: return 96;
  }
}

double balance_radius(const DensitySpec& spec, double k, int resolution) {
  if (!(k > 0.0)) throw std::invalid_argument("balance_radius: k <= 0");
  const int dim = spec.roots().rank();
  const DensityFn source = [&spec](const Vec& x) {
    return spec.source_density(x);
  };
  const DensityFn target = [&spec](const Vec& y) {
    return spec.target_density(y);
  };
  const double source_mass = ball_mass_plain(source, dim, k, resolution);
  if (!(source_mass > 0.0))
    throw std::runtime_error("balance_radius: source mass is not positive");

  double lo = 0.0;
  double hi = std::max(k, 1e-3);
  int doublings = 0;
  while (ball_mass_plain(target, dim, hi, resolution) < source_mass) {
    hi *= 2.0;
    if (++doublings > 200)
      throw std::runtime_error("balance_radius: bracket failure");
  }
  double best = hi;
  double best_mismatch = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo) || !(mid < hi)) break;
    const double m = ball_mass_plain(target, dim, mid, resolution);
    const double mismatch = std::abs(m - source_mass) / source_mass;
    if (mismatch < best_mismatch) {
      best_mismatch = mismatch;
      best = mid;
    }
    if (mismatch <= 1e-10) break;
    if (m < source_mass)
      lo = mid;
    else
      hi = mid;
  }
  if (best_mismatch > 1e-8)
    throw std::runtime_error("balance_radius: could not match masses to 1e-8");
  return best;
}

}  // namespace weylma
