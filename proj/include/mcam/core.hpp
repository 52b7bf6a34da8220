#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mcam {

// Error classes map one-to-one onto CLI exit codes (see tools/mcam_cli.cpp).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mathematically invalid input (non-positive lengths, wrong regime, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// A reconstruction step could not produce a result from the data it was given.
class PipelineError : public Error {
public:
    using Error::Error;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
    friend Vec2 operator/(Vec2 a, double s) { return {a.x / s, a.y / s}; }
    friend bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

/// Position of a micro-camera in the array grid.
struct CameraIndex {
    int row = 0;
    int col = 0;

    friend auto operator<=>(const CameraIndex&, const CameraIndex&) = default;
};

inline std::string to_string(CameraIndex c) {
    return "r" + std::to_string(c.row) + "c" + std::to_string(c.col);
}

}  // namespace mcam
