#pragma once

#include <stdexcept>
#include <string>

namespace tcnids {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor/layer shape disagreements.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Invalid argument values (rates, fractions, counts).
class ArgumentError : public Error {
public:
    using Error::Error;
};

// Class labels outside the expected range.
class LabelError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// CSV ingestion problems: unreadable files, missing label columns, malformed rows.
class IngestionError : public IoError {
public:
    using IoError::IoError;
};

class ModelLoadError : public IoError {
public:
    using IoError::IoError;
};

class ModelVersionError : public ModelLoadError {
public:
    using ModelLoadError::ModelLoadError;
};

class ModelCorruptError : public ModelLoadError {
public:
    using ModelLoadError::ModelLoadError;
};

class ModelShapeError : public ModelLoadError {
public:
    using ModelLoadError::ModelLoadError;
};

// Non-finite loss during optimization.
class TrainingError : public Error {
public:
    using Error::Error;
};

// Model and dataset artifacts that do not fit together.
class CompatibilityError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace tcnids
