#pragma once

#include <stdexcept>
#include <string>

namespace mpd {

// Base of every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Missing or malformed columns in an input file.
struct SchemaError : Error {
  using Error::Error;
};

// Cell that could not be parsed; carries the 1-based data row.
struct ParseError : Error {
  ParseError(const std::string& what, std::size_t row)
      : Error(what + " (row " + std::to_string(row) + ")"), row(row) {}
  std::size_t row;
};

// Semantic validation failure (gaps in time index, bad config values, ...).
struct ValidationError : Error {
  using Error::Error;
};

// Parameter outside its admissible domain.
struct DomainError : Error {
  using Error::Error;
};

// Input without the variation a fit needs (constant data, single class, ...).
struct DegenerateDataError : Error {
  using Error::Error;
};

// Sampler could not make progress.
struct ChainError : Error {
  using Error::Error;
};

}  // namespace mpd
