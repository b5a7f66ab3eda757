#pragma once

#include "bifcurrent/lattice.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace bifcurrent {

/// A representation of the free group <X, Y> into SL(2, C), given by the
/// images of the generators.
struct Representation {
  std::string name;
  LetterImages<std::complex<double>> images;
  std::vector<Word> cusp_words;

  Matrix2cd matrix(const Word& w) const { return evaluate(w, images); }
  MoebiusElement element(const Word& w) const { return MoebiusElement(matrix(w)); }

  /// tr^2 of every cusp word equals 4 within tol.
  bool parabolic_ok(double tol = kDefaultTol) const;
};

/// Images normalized to determinant 1 (throws InvalidElement when singular).
Representation make_representation(std::string name, const Matrix2cd& x, const Matrix2cd& y,
                                   std::vector<Word> cusp_words);

/// The uniformizing representation of a surface.
Representation canonical_representation(const FuchsianSurface& s);

/// m rho m^-1.
Representation conjugate(const Representation& rho, const Matrix2cd& m);

/// rho composed with the endomorphism X -> x_image, Y -> y_image.
Representation precompose(const Representation& rho, const Word& x_image, const Word& y_image);

/// Fixed points on the Riemann sphere of a non-identity element (infinity is
/// returned as a non-finite number).
std::pair<std::complex<double>, std::complex<double>> fixed_points(const MoebiusElement& g);

/// Heuristic non-elementary check: two loxodromic images of words of length
/// <= max_length whose fixed-point pairs are disjoint.
bool nonelementary_heuristic(const Representation& rho, int max_length = 6);

/// Text format: one line per generator, "X re im re im re im re im" (row
/// major), optional "cusp WORD" lines and "name NAME"; '#' starts a comment.
Representation read_representation(std::istream& in);
void write_representation(std::ostream& out, const Representation& rho);

/// Incremental products along a sequence of words sharing long prefixes (the
/// successive checkpoints of a tracked path): only the changed tail is
/// re-multiplied.
template <typename Scalar>
class PrefixProducts {
 public:
  explicit PrefixProducts(const LetterImages<Scalar>& img) : img_(&img), stack_(1) {}

  const ScaledMoebius<Scalar>& update(const Word& w) {
    const auto& ls = w.letters();
    std::size_t common = 0;
    while (common < letters_.size() && common < ls.size() && letters_[common] == ls[common]) ++common;
    letters_.resize(common);
    stack_.resize(common + 1);
    for (std::size_t k = common; k < ls.size(); ++k) {
      ScaledMoebius<Scalar> next = stack_.back();
      next.multiply_right((*img_)[ls[k]]);
      stack_.push_back(next);
      letters_.push_back(ls[k]);
    }
    return stack_.back();
  }

 private:
  const LetterImages<Scalar>* img_;
  std::vector<Letter> letters_;
  std::vector<ScaledMoebius<Scalar>> stack_;
};

}  // namespace bifcurrent
