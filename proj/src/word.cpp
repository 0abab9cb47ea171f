#include "wrflow/word.hpp"

#include <charconv>

#include "wrflow/errors.hpp"

namespace wrflow {

Word Word::parse(std::string_view text, std::size_t m)
{
    Word w;
    if (text.empty()) return w;
    if (m <= 9) {
        for (char c : text) {
            if (c < '0' || c > '9')
                throw Error(ErrorKind::ParseError, "bad letter '" + std::string(1, c) + "' in word");
            w.letters_.push_back(static_cast<Letter>(c - '0'));
        }
    } else {
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const auto comma = text.find(',', pos);
            const auto token = text.substr(pos, comma == std::string_view::npos ? text.size() - pos : comma - pos);
            unsigned value = 0;
            const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
            if (res.ec != std::errc() || res.ptr != token.data() + token.size() || value > 0xFFFF)
                throw Error(ErrorKind::ParseError, "bad letter '" + std::string(token) + "' in word");
            w.letters_.push_back(static_cast<Letter>(value));
            if (comma == std::string_view::npos) break;
            pos = comma + 1;
        }
    }
    w.validate(m);
    return w;
}

std::string Word::to_string(std::size_t m) const
{
    std::string out;
    for (std::size_t i = 0; i < letters_.size(); ++i) {
        if (m <= 9) {
            out.push_back(static_cast<char>('0' + letters_[i]));
        } else {
            if (i) out.push_back(',');
            out += std::to_string(letters_[i]);
        }
    }
    return out;
}

Word Word::prefix(std::size_t k) const
{
    if (k > letters_.size())
        throw Error(ErrorKind::InvalidArgument, "prefix length exceeds word length");
    return Word(std::vector<Letter>(letters_.begin(), letters_.begin() + static_cast<std::ptrdiff_t>(k)));
}

Word Word::child(Letter j) const
{
    Word w = *this;
    w.letters_.push_back(j);
    return w;
}

void Word::validate(std::size_t m) const
{
    for (Letter j : letters_)
        if (j < 1 || j > m)
            throw Error(ErrorKind::InvalidLetter,
                        "letter " + std::to_string(j) + " outside [1, " + std::to_string(m) + "]");
}

} // namespace wrflow
