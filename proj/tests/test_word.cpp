#include "doctest.h"

#include "bifcurrent/word.hpp"

#include <random>
#include <set>

using namespace bifcurrent;

namespace {

Word random_word(std::mt19937_64& rng, int max_len) {
  std::uniform_int_distribution<int> len(0, max_len), letter(0, 3);
  Word w;
  const int n = len(rng);
  for (int j = 0; j < n; ++j) w.push_back(Letter(letter(rng)));
  return w;
}

Word brute_least_rotation(const Word& w) {
  Word best = w;
  auto ls = w.letters();
  for (std::size_t k = 1; k < ls.size(); ++k) {
    std::rotate(ls.begin(), ls.begin() + 1, ls.end());
    auto r = Word::from_letters(ls);
    if (r < best) best = r;
  }
  return best;
}

}  // namespace

TEST_CASE("free reduction and string form") {
  CHECK(Word("XxYy").empty());
  CHECK(Word("XYyx").str() == "e");
  CHECK(Word("XYx").str() == "XYx");
  CHECK(Word("XY").inverse().str() == "yx");
  CHECK((Word("XY") * Word("yX")).str() == "XX");
  CHECK_THROWS(Word("XZ"));
  std::mt19937_64 rng(1);
  for (int k = 0; k < 1000; ++k) {
    Word w = random_word(rng, 12);
    CHECK(Word(w.str() == "e" ? "" : w.str()) == w);
    CHECK((w * w.inverse()).empty());
    for (std::size_t j = 1; j < w.size(); ++j) CHECK(w[j] != inverse(w[j - 1]));
  }
}

TEST_CASE("cyclic reduction, rotation, powers") {
  CHECK(cyclic_reduce(Word("XYx")).str() == "Y");
  CHECK(cyclic_reduce(Word("xYXX")).str() == "YX");
  CHECK(least_rotation(Word("YX")).str() == "XY");
  CHECK(is_proper_power(Word("XYXY")));
  CHECK_FALSE(is_proper_power(Word("XYX")));
  CHECK_FALSE(is_proper_power(Word("X")));
  CHECK(is_proper_power(Word("XX")));

  std::mt19937_64 rng(2);
  for (int k = 0; k < 5000; ++k) {
    Word w = cyclic_reduce(random_word(rng, 16));
    REQUIRE(least_rotation(w) == brute_least_rotation(w));
    // conjugation leaves the class representative unchanged
    Word u = random_word(rng, 5);
    REQUIRE(conjugacy_representative(u * w * u.inverse()) == conjugacy_representative(w));
    REQUIRE(conjugacy_representative(w.inverse(), true) == conjugacy_representative(w, true));
    // proper power oracle: some u^k with k >= 2
    bool brute = false;
    const auto n = w.size();
    for (std::size_t p = 1; p < n && !brute; ++p) {
      if (n % p) continue;
      Word base = Word::from_letters({w.letters().begin(), w.letters().begin() + p});
      Word acc;
      for (std::size_t j = 0; j < n / p; ++j) acc *= base;
      brute = acc == w;
    }
    REQUIRE(is_proper_power(w) == brute);
  }
}
