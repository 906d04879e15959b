#pragma once

// Binary mapping files, CSV dumps and atomic file output.
//
// Mapping file layout (little-endian):
//   "HSMF", u32 version = 1, u32 nx, u32 ny, f64 origin x, f64 origin y,
//   f64 spacing,
//   u64 run count, u32 runs: alternating unmasked / masked cell runs in
//   row-major cell order, starting with unmasked (possibly 0),
//   u64 value count (= masked node count), f64 pairs (u, v) for the masked
//   nodes in row-major order.

#include <cstdint>
#include <string>
#include <vector>

#include "hs/field.hpp"
#include "hs/grid.hpp"

namespace hs {

inline constexpr std::uint32_t kMappingFileVersion = 1;

std::vector<std::uint8_t> encode_mapping(const GridMapping& h);
/// Throws FormatError on any inconsistency.
GridMapping decode_mapping(const std::vector<std::uint8_t>& bytes);

/// Throws FormatError when the file cannot be read.
std::vector<std::uint8_t> read_file(const std::string& path);
/// Writes through a temporary file in the same directory and renames it.
void write_file_atomic(const std::string& path, const std::vector<std::uint8_t>& bytes);
void write_text_atomic(const std::string& path, const std::string& text);

GridMapping read_mapping(const std::string& path);
void write_mapping(const std::string& path, const GridMapping& h);

/// "i,j,x,y,u,v" rows for the masked nodes.
std::string mapping_csv(const GridMapping& h);
/// "i,j,x,y,re,im" rows for the entries of a node field where `valid` is set
/// (every masked node when `valid` is empty).
std::string field_csv(const GridDomain& d, const std::vector<Complex>& values,
                      const std::vector<std::uint8_t>& valid = {});

/// FNV-1a, for input fingerprints in run manifests.
std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes);

}  // namespace hs
