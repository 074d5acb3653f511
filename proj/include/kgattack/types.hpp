#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace kgattack {

// Dense indices assigned by interning; valid in [0, |E|) resp. [0, |R|).
using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
    EntityId s = 0;
    RelationId r = 0;
    EntityId o = 0;

    friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
    std::size_t operator()(const Triple& t) const noexcept {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (std::uint64_t v : {std::uint64_t{t.s}, std::uint64_t{t.r}, std::uint64_t{t.o}}) {
            h ^= v + 0x9e3779b97f4a7c15ULL;
            h *= 0x100000001b3ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

// Base class for everything thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

}  // namespace kgattack
