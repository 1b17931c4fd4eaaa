#pragma once

#include <stdexcept>
#include <string>

namespace pieceformer {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid graph structure (bad endpoints, empty node sets, N too small).
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file; message carries path and line/field context.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Synthetic generation could not satisfy its spec.
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// A sampled edit is infeasible on the given graph; callers resample.
class EditError : public Error {
 public:
  using Error::Error;
};

/// Partitioning failure (infeasible balance, bad parameters).
class PartitionError : public Error {
 public:
  using Error::Error;
};

/// Tensor shape mismatch, index out of range, or invalid tape use.
class TensorError : public Error {
 public:
  using Error::Error;
};

/// Training prerequisites violated (too few graphs, empty pair lists).
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Similarity report construction failure (width mismatch, bad ranks).
class ReportError : public Error {
 public:
  using Error::Error;
};

/// 2D projection failure (too few points).
class ProjectionError : public Error {
 public:
  using Error::Error;
};

/// Warm-start transfer failure (no node correspondence).
class WarmStartError : public Error {
 public:
  using Error::Error;
};

/// JumpStart benchmark prerequisites violated.
class BenchmarkError : public Error {
 public:
  using Error::Error;
};

}  // namespace pieceformer
