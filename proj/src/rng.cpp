#include "aamgan/rng.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <sstream>

namespace aamgan {

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

uint64_t derive_seed(uint64_t seed, uint64_t stream, uint64_t counter) {
  return mix64(seed ^ mix64(stream ^ mix64(counter)));
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log1p(-u1));
  double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

std::string Rng::serialize() const {
  std::ostringstream os;
  os << gen_ << " " << (has_spare_ ? 1 : 0);
  if (has_spare_) {
    uint64_t bits;
    std::memcpy(&bits, &spare_, sizeof bits);
    os << " " << bits;
  }
  return os.str();
}

Rng Rng::deserialize(const std::string& s) {
  Rng r(0);
  std::istringstream is(s);
  is >> r.gen_;
  int flag = 0;
  is >> flag;
  r.has_spare_ = flag != 0;
  if (r.has_spare_) {
    uint64_t bits = 0;
    is >> bits;
    std::memcpy(&r.spare_, &bits, sizeof bits);
  }
  require(!is.fail(), ErrorKind::CorruptCheckpoint, "bad RNG state string");
  return r;
}

const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::NearZeroVector: return "NearZeroVector";
    case ErrorKind::InvalidLabel: return "InvalidLabel";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::IOFailure: return "IOFailure";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::DecodeError: return "DecodeError";
    case ErrorKind::BadLabel: return "BadLabel";
    case ErrorKind::EmptySet: return "EmptySet";
    case ErrorKind::ClassMismatch: return "ClassMismatch";
    case ErrorKind::ProvenanceError: return "ProvenanceError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Error";
}

}  // namespace aamgan
