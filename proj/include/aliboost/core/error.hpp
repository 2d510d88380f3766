#pragma once

#include <stdexcept>
#include <string>

namespace aliboost {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration. The CLI maps this to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

class LookupError : public Error {
public:
    using Error::Error;
};

/// Feature vector does not match the configured layout.
class FeatureError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

class AdmissionError : public Error {
public:
    using Error::Error;
};

/// A boost exposure arrived for a ledger whose stage budget is already spent.
/// Reaching this means the bidding layer failed to stop delivery in time.
class LedgerOverflowError : public Error {
public:
    using Error::Error;
};

}  // namespace aliboost
