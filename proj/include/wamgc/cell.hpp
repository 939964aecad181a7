#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace wamgc {

// Index of a cell in the simulated flat address space.
struct Address {
    std::uint64_t value = 0;

    constexpr auto operator<=>(const Address &) const = default;
    constexpr Address operator+(std::uint64_t n) const { return Address{value + n}; }
    constexpr std::uint64_t operator-(Address other) const { return value - other.value; }
};

using BlockId = std::uint32_t;
inline constexpr BlockId kNoBlock = ~BlockId{0};

//
// Tagged heap word. Int and Atom are the two atomic kinds. Functor only
// appears as the header cell of a structure, Forward only while a
// collection is running.
//
enum class Tag : std::uint8_t { Ref, Struct, List, Functor, Int, Atom, Forward };

const char *tag_name(Tag t);

struct Cell {
    Tag tag = Tag::Int;
    std::uint32_t arity = 0;
    std::uint64_t data = 0;

    static constexpr Cell ref(Address a) { return Cell{Tag::Ref, 0, a.value}; }
    static constexpr Cell structure(Address a) { return Cell{Tag::Struct, 0, a.value}; }
    static constexpr Cell list(Address a) { return Cell{Tag::List, 0, a.value}; }
    static constexpr Cell functor(std::uint32_t sym, std::uint32_t n) { return Cell{Tag::Functor, n, sym}; }
    static constexpr Cell integer(std::int64_t v) { return Cell{Tag::Int, 0, static_cast<std::uint64_t>(v)}; }
    static constexpr Cell atom(std::uint32_t sym) { return Cell{Tag::Atom, 0, sym}; }
    static constexpr Cell forward(Address a) { return Cell{Tag::Forward, 0, a.value}; }

    constexpr bool is_pointer() const { return tag == Tag::Ref || tag == Tag::Struct || tag == Tag::List; }
    constexpr bool is_atomic() const { return tag == Tag::Int || tag == Tag::Atom; }
    constexpr Address address() const { return Address{data}; }
    constexpr std::int64_t int_value() const { return static_cast<std::int64_t>(data); }
    constexpr std::uint32_t symbol() const { return static_cast<std::uint32_t>(data); }

    // An unbound variable is a Ref cell stored at the address it names.
    constexpr bool is_unbound_at(Address self) const { return tag == Tag::Ref && data == self.value; }

    constexpr bool operator==(const Cell &) const = default;
};

std::string to_string(const Cell &c);

enum class FaultKind {
    Corruption,
    OutOfMemory,
    AllocationTooLarge,
    NoChoicePoint,
    ContractViolation,
    UnknownLabel,
};

const char *fault_name(FaultKind k);

class Fault : public std::runtime_error {
public:
    Fault(FaultKind kind, const std::string &what)
        : std::runtime_error(std::string(fault_name(kind)) + ": " + what), kind_(kind) {}

    FaultKind kind() const { return kind_; }

private:
    FaultKind kind_;
};

} // namespace wamgc

template <> struct std::hash<wamgc::Address> {
    std::size_t operator()(const wamgc::Address &a) const noexcept { return std::hash<std::uint64_t>{}(a.value); }
};
