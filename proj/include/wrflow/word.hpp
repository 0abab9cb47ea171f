#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace wrflow {

/// Finite tree address over the alphabet {1..m}. Letters are 1-based.
class Word {
public:
    using Letter = std::uint16_t;

    Word() = default;
    explicit Word(std::vector<Letter> letters) : letters_(std::move(letters)) {}
    Word(std::initializer_list<Letter> letters) : letters_(letters) {}

    /// Digits for m <= 9 ("121"), comma-separated integers otherwise ("1,10,3").
    static Word parse(std::string_view text, std::size_t m);
    std::string to_string(std::size_t m) const;

    std::size_t size() const noexcept { return letters_.size(); }
    bool empty() const noexcept { return letters_.empty(); }
    Letter operator[](std::size_t i) const { return letters_[i]; }
    Letter last() const { return letters_.back(); }
    const std::vector<Letter>& letters() const noexcept { return letters_; }

    Word prefix(std::size_t k) const;
    Word parent() const { return prefix(size() - 1); }
    Word child(Letter j) const;
    void push_back(Letter j) { letters_.push_back(j); }
    void pop_back() { letters_.pop_back(); }

    /// Throws InvalidLetter unless every letter lies in [1, m].
    void validate(std::size_t m) const;

    auto operator<=>(const Word&) const = default;

private:
    std::vector<Letter> letters_;
};

} // namespace wrflow
