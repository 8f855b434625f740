#pragma once

#include <compare>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace klv {

using Letter = std::uint8_t;

/// A multi-index over the alphabet {0, 1, ..., d}; letter 0 is the time direction.
class Word {
public:
    Word() = default;
    Word(std::initializer_list<int> letters) {
        letters_.reserve(letters.size());
        for (int l : letters) push_back(l);
    }
    explicit Word(std::vector<Letter> letters) : letters_(std::move(letters)) {}

    std::size_t length() const noexcept { return letters_.size(); }
    bool empty() const noexcept { return letters_.empty(); }

    /// Word length plus the number of 0 letters: time scales like (sqrt t)^2.
    int graded_degree() const noexcept {
        int deg = 0;
        for (Letter l : letters_) deg += (l == 0) ? 2 : 1;
        return deg;
    }

    Letter operator[](std::size_t i) const { return letters_[i]; }
    std::span<const Letter> letters() const noexcept { return letters_; }
    Letter back() const { return letters_.back(); }

    void push_back(int letter) {
        if (letter < 0 || letter > 255) throw RangeError("word letter out of range");
        letters_.push_back(static_cast<Letter>(letter));
    }

    Word concat(const Word& other) const {
        Word out = *this;
        out.letters_.insert(out.letters_.end(), other.letters_.begin(), other.letters_.end());
        return out;
    }

    Word reversed() const { return Word(std::vector<Letter>(letters_.rbegin(), letters_.rend())); }

    /// Largest letter used, or -1 for the empty word.
    int max_letter() const noexcept {
        int m = -1;
        for (Letter l : letters_) m = std::max<int>(m, l);
        return m;
    }

    std::string to_string() const {
        std::string s = "(";
        for (std::size_t i = 0; i < letters_.size(); ++i) {
            if (i) s += ',';
            s += std::to_string(letters_[i]);
        }
        return s + ")";
    }

    auto operator<=>(const Word&) const = default;
    bool operator==(const Word&) const = default;

private:
    std::vector<Letter> letters_;
};

/// Formal sum of words with integer multiplicities.
using WordSum = std::map<Word, long long>;

/// All riffle interleavings of u and v, counted with multiplicity.
inline WordSum shuffle(const Word& u, const Word& v) {
    if (u.empty()) return {{v, 1}};
    if (v.empty()) return {{u, 1}};
    // sh(u'a, v'b) = sh(u', v'b) a + sh(u'a, v') b
    auto drop_last = [](const Word& w) {
        auto l = w.letters();
        return Word(std::vector<Letter>(l.begin(), l.end() - 1));
    };
    WordSum out;
    for (const auto& [w, c] : shuffle(drop_last(u), v)) {
        Word x = w;
        x.push_back(u.back());
        out[x] += c;
    }
    for (const auto& [w, c] : shuffle(u, drop_last(v))) {
        Word x = w;
        x.push_back(v.back());
        out[x] += c;
    }
    return out;
}

}  // namespace klv
