#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace curator {

/// The six metadata fields that make up the generalized-tag space.
enum class Field : std::uint8_t {
  department = 0,
  artist_display_name,
  object_begin_date,
  medium,
  classification,
  tags,
};

inline constexpr std::size_t kFieldCount = 6;

inline constexpr std::array<Field, kFieldCount> kAllFields = {
    Field::department, Field::artist_display_name, Field::object_begin_date,
    Field::medium,     Field::classification,      Field::tags,
};

/// Column / key names as they appear in the museum CSV and the exhibitions JSON.
inline constexpr std::array<std::string_view, kFieldCount> kFieldNames = {
    "Department", "Artist Display Name", "Object Begin Date", "Medium", "Classification", "Tags",
};

constexpr std::size_t index_of(Field f) noexcept { return static_cast<std::size_t>(f); }
constexpr std::string_view field_name(Field f) noexcept { return kFieldNames[index_of(f)]; }

/// Multi-valued fields are pipe-separated in the catalog CSV.
constexpr bool is_multi_valued(Field f) noexcept {
  return f == Field::artist_display_name || f == Field::classification || f == Field::tags;
}

inline std::optional<Field> field_from_name(std::string_view name) {
  for (Field f : kAllFields) {
    if (field_name(f) == name) return f;
  }
  return std::nullopt;
}

/// Bit set over the six fields.
using FieldMask = std::uint8_t;
constexpr FieldMask field_bit(Field f) noexcept { return static_cast<FieldMask>(1u << index_of(f)); }

}  // namespace curator
