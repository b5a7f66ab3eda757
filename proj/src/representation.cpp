#include "bifcurrent/representation.hpp"

#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace bifcurrent {

bool Representation::parabolic_ok(double tol) const {
  for (const Word& w : cusp_words) {
    const auto t = matrix(w).trace();
    if (std::abs(t * t - 4.0) > tol) return false;
  }
  return true;
}

Representation make_representation(std::string name, const Matrix2cd& x, const Matrix2cd& y,
                                   std::vector<Word> cusp_words) {
  // Moebius normalizes to det 1 and throws on singular input
  const MoebiusElement gx(x), gy(y);
  Representation r;
  r.name = std::move(name);
  r.images = letter_images<std::complex<double>>(gx.matrix(), gy.matrix());
  r.cusp_words = std::move(cusp_words);
  return r;
}

Representation canonical_representation(const FuchsianSurface& s) {
  return make_representation("canonical:" + s.name, s.images[kX].cast<std::complex<double>>(),
                             s.images[kY].cast<std::complex<double>>(), s.cusp_words);
}

Representation conjugate(const Representation& rho, const Matrix2cd& m) {
  const Matrix2cd mi = m.inverse();
  return make_representation(rho.name + ":conj", m * rho.images[kX] * mi, m * rho.images[kY] * mi,
                             rho.cusp_words);
}

Representation precompose(const Representation& rho, const Word& x_image, const Word& y_image) {
  // cusp words are carried over unchanged: callers precompose with
  // automorphisms that preserve the cusp class up to conjugacy and inversion
  return make_representation(rho.name + ":auto", rho.matrix(x_image), rho.matrix(y_image),
                             rho.cusp_words);
}

std::pair<std::complex<double>, std::complex<double>> fixed_points(const MoebiusElement& g) {
  using C = std::complex<double>;
  const C a = g.a(), b = g.b(), c = g.c(), d = g.d();
  if (std::abs(c) < 1e-14) {
    const C inf(std::numeric_limits<double>::infinity(), 0);
    // z -> (a z + b) / d: infinity and b / (d - a)
    if (std::abs(d - a) < 1e-14) return {inf, inf};
    return {inf, b / (d - a)};
  }
  // c z^2 + (d - a) z - b = 0
  const C disc = std::sqrt((d - a) * (d - a) + 4.0 * b * c);
  return {(a - d + disc) / (2.0 * c), (a - d - disc) / (2.0 * c)};
}

namespace {

double chordal(std::complex<double> z, std::complex<double> w) {
  const bool zi = !std::isfinite(z.real()), wi = !std::isfinite(w.real());
  if (zi && wi) return 0;
  if (zi) return 2 / std::sqrt(1 + std::norm(w));
  if (wi) return 2 / std::sqrt(1 + std::norm(z));
  return 2 * std::abs(z - w) / std::sqrt((1 + std::norm(z)) * (1 + std::norm(w)));
}

}  // namespace

bool nonelementary_heuristic(const Representation& rho, int max_length) {
  const std::vector<Word> words = reduced_words(max_length);
  std::vector<std::pair<std::complex<double>, std::complex<double>>> axes;
  for (const Word& w : words) {
    const MoebiusElement g = rho.element(w);
    if (classify(g) != MoebiusClass::loxodromic) continue;
    const auto fp = fixed_points(g);
    for (const auto& other : axes) {
      const double sep = std::min({chordal(fp.first, other.first), chordal(fp.first, other.second),
                                   chordal(fp.second, other.first), chordal(fp.second, other.second)});
      if (sep > 1e-6) return true;
    }
    if (axes.size() < 64) axes.push_back(fp);
  }
  return false;
}

Representation read_representation(std::istream& in) {
  std::string line, name = "file";
  Matrix2cd x = Matrix2cd::Zero(), y = Matrix2cd::Zero();
  bool have_x = false, have_y = false;
  std::vector<Word> cusps;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "name") {
      ls >> name;
    } else if (key == "cusp") {
      std::string w;
      ls >> w;
      cusps.emplace_back(w);
    } else if (key == "X" || key == "Y") {
      Matrix2cd& m = key == "X" ? x : y;
      for (int k = 0; k < 4; ++k) {
        double re, im;
        if (!(ls >> re >> im)) throw std::runtime_error("representation: bad entries for " + key);
        m(k / 2, k % 2) = {re, im};
      }
      (key == "X" ? have_x : have_y) = true;
    } else {
      throw std::runtime_error("representation: unknown key " + key);
    }
  }
  if (!have_x || !have_y) throw std::runtime_error("representation: need X and Y");
  return make_representation(name, x, y, cusps);
}

void write_representation(std::ostream& out, const Representation& rho) {
  out.precision(17);
  out << "name " << rho.name << "\n";
  for (Letter l : {kX, kY}) {
    out << letter_char(l);
    for (int k = 0; k < 4; ++k) out << " " << rho.images[l](k / 2, k % 2).real() << " " << rho.images[l](k / 2, k % 2).imag();
    out << "\n";
  }
  for (const Word& w : rho.cusp_words) out << "cusp " << w.str() << "\n";
}

}  // namespace bifcurrent
