#pragma once

#include "bifcurrent/moebius.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace bifcurrent {

/// Letters of the free group F(X, Y). The inverse of letter l is l ^ 1.
enum Letter : std::uint8_t { kX = 0, kXinv = 1, kY = 2, kYinv = 3 };

inline constexpr Letter inverse(Letter l) { return Letter(l ^ 1u); }

/// 'X', 'x', 'Y', 'y' (lowercase is the inverse).
char letter_char(Letter l);
Letter letter_from_char(char c);

/// A freely reduced word in X, Y and their inverses.
class Word {
 public:
  Word() = default;
  explicit Word(std::string_view s);
  static Word from_letters(const std::vector<Letter>& ls);

  std::size_t size() const { return letters_.size(); }
  bool empty() const { return letters_.empty(); }
  Letter operator[](std::size_t k) const { return letters_[k]; }
  const std::vector<Letter>& letters() const { return letters_; }

  Letter back() const { return letters_.back(); }
  Letter front() const { return letters_.front(); }

  /// Append one letter, cancelling against the last one if needed.
  void push_back(Letter l) {
    if (!letters_.empty() && letters_.back() == bifcurrent::inverse(l))
      letters_.pop_back();
    else
      letters_.push_back(l);
  }
  void pop_back() { letters_.pop_back(); }

  Word inverse() const;
  std::string str() const;

  friend Word operator*(const Word& a, const Word& b);
  Word& operator*=(const Word& b);

  friend bool operator==(const Word&, const Word&) = default;
  friend auto operator<=>(const Word& a, const Word& b) { return a.letters_ <=> b.letters_; }

 private:
  std::vector<Letter> letters_;
};

/// Conjugate to a cyclically reduced word (strip matching ends).
Word cyclic_reduce(const Word& w);

/// Lexicographically least rotation of a cyclically reduced word.
Word least_rotation(const Word& w);

/// Canonical representative of the conjugacy class of w; if unoriented,
/// also the class of w^-1 is identified.
Word conjugacy_representative(const Word& w, bool unoriented = false);

/// w = u^k with k >= 2 (w cyclically reduced).
bool is_proper_power(const Word& w);

/// All nonempty reduced words of length <= max_length, by length.
std::vector<Word> reduced_words(int max_length);

/// Generator images indexed by Letter.
template <typename Scalar>
using LetterImages = std::array<Matrix2<Scalar>, 4>;

template <typename Scalar>
LetterImages<Scalar> letter_images(const Matrix2<Scalar>& x, const Matrix2<Scalar>& y) {
  auto inv = [](const Matrix2<Scalar>& m) {
    Matrix2<Scalar> r;
    r << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
    return r;
  };
  return {x, inv(x), y, inv(y)};
}

/// Product of the letter images from left to right.
template <typename Scalar>
Matrix2<Scalar> evaluate(const Word& w, const LetterImages<Scalar>& img) {
  Matrix2<Scalar> m = Matrix2<Scalar>::Identity();
  for (Letter l : w.letters()) m = m * img[l];
  return m;
}

template <typename Scalar>
ScaledMoebius<Scalar> evaluate_scaled(const Word& w, const LetterImages<Scalar>& img) {
  ScaledMoebius<Scalar> acc;
  for (Letter l : w.letters()) acc.multiply_right(img[l]);
  return acc;
}

}  // namespace bifcurrent

template <>
struct std::hash<bifcurrent::Word> {
  std::size_t operator()(const bifcurrent::Word& w) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (auto l : w.letters()) h = (h ^ l) * 1099511628211ull;
    return h ^ w.size();
  }
};
