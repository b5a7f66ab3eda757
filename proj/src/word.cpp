#include "bifcurrent/word.hpp"

#include <algorithm>
#include <stdexcept>

namespace bifcurrent {

char letter_char(Letter l) {
  static constexpr char kChars[4] = {'X', 'x', 'Y', 'y'};
  return kChars[l & 3u];
}

Letter letter_from_char(char c) {
  switch (c) {
    case 'X': return kX;
    case 'x': return kXinv;
    case 'Y': return kY;
    case 'y': return kYinv;
    default: throw std::invalid_argument(std::string("bad letter '") + c + "'");
  }
}

Word::Word(std::string_view s) {
  for (char c : s) {
    if (c == 'e' || c == '1') continue;  // identity markers
    push_back(letter_from_char(c));
  }
}

Word Word::from_letters(const std::vector<Letter>& ls) {
  Word w;
  for (Letter l : ls) w.push_back(l);
  return w;
}

Word Word::inverse() const {
  Word r;
  r.letters_.reserve(letters_.size());
  for (auto it = letters_.rbegin(); it != letters_.rend(); ++it)
    r.letters_.push_back(bifcurrent::inverse(*it));
  return r;
}

std::string Word::str() const {
  if (letters_.empty()) return "e";
  std::string s;
  s.reserve(letters_.size());
  for (Letter l : letters_) s.push_back(letter_char(l));
  return s;
}

Word operator*(const Word& a, const Word& b) {
  Word r = a;
  r *= b;
  return r;
}

Word& Word::operator*=(const Word& b) {
  for (Letter l : b.letters_) push_back(l);
  return *this;
}

Word cyclic_reduce(const Word& w) {
  const auto& ls = w.letters();
  std::size_t lo = 0, hi = ls.size();
  while (hi - lo >= 2 && ls[lo] == inverse(ls[hi - 1])) {
    ++lo;
    --hi;
  }
  return Word::from_letters(std::vector<Letter>(ls.begin() + lo, ls.begin() + hi));
}

Word least_rotation(const Word& w) {
  const auto& s = w.letters();
  const std::size_t n = s.size();
  if (n < 2) return w;
  // Booth's algorithm
  std::vector<int> f(2 * n, -1);
  std::size_t k = 0;
  for (std::size_t j = 1; j < 2 * n; ++j) {
    const Letter sj = s[j % n];
    int i = f[j - k - 1];
    while (i != -1 && sj != s[(k + i + 1) % n]) {
      if (sj < s[(k + i + 1) % n]) k = j - i - 1;
      i = f[i];
    }
    if (i == -1 && sj != s[(k + i + 1) % n]) {
      if (sj < s[(k + i + 1) % n]) k = j;
      f[j - k] = -1;
    } else {
      f[j - k] = i + 1;
    }
  }
  std::vector<Letter> r(n);
  for (std::size_t j = 0; j < n; ++j) r[j] = s[(k + j) % n];
  return Word::from_letters(r);
}

Word conjugacy_representative(const Word& w, bool unoriented) {
  Word c = least_rotation(cyclic_reduce(w));
  if (!unoriented) return c;
  Word ci = least_rotation(c.inverse());
  return std::min(c, ci);
}

bool is_proper_power(const Word& w) {
  const auto& s = w.letters();
  const std::size_t n = s.size();
  for (std::size_t p = 1; p <= n / 2; ++p) {
    if (n % p) continue;
    bool periodic = true;
    for (std::size_t j = p; j < n && periodic; ++j) periodic = s[j] == s[j - p];
    if (periodic) return true;
  }
  return false;
}

std::vector<Word> reduced_words(int max_length) {
  std::vector<Word> out, layer{Word()};
  for (int len = 1; len <= max_length; ++len) {
    std::vector<Word> next;
    for (const Word& w : layer)
      for (Letter l : {kX, kXinv, kY, kYinv}) {
        if (!w.empty() && w.back() == inverse(l)) continue;
        Word v = w;
        v.push_back(l);
        next.push_back(std::move(v));
      }
    out.insert(out.end(), next.begin(), next.end());
    layer = std::move(next);
  }
  return out;
}

}  // namespace bifcurrent
