#pragma once

#include <compare>

namespace mcam {

/// Physical length. Stored in micrometres; construct through the named
/// factories so the unit is always explicit at the call site.
class Length {
public:
    constexpr Length() = default;

    static constexpr Length um(double v) { return Length(v); }
    static constexpr Length mm(double v) { return Length(v * 1000.0); }

    constexpr double in_um() const { return um_; }
    constexpr double in_mm() const { return um_ / 1000.0; }

    constexpr Length operator+(Length o) const { return Length(um_ + o.um_); }
    constexpr Length operator-(Length o) const { return Length(um_ - o.um_); }
    constexpr Length operator-() const { return Length(-um_); }
    constexpr Length operator*(double s) const { return Length(um_ * s); }
    constexpr Length operator/(double s) const { return Length(um_ / s); }
    constexpr double operator/(Length o) const { return um_ / o.um_; }
    friend constexpr Length operator*(double s, Length l) { return l * s; }

    constexpr auto operator<=>(const Length&) const = default;

private:
    constexpr explicit Length(double um) : um_(um) {}
    double um_ = 0.0;
};

class Area {
public:
    constexpr Area() = default;

    static constexpr Area um2(double v) { return Area(v); }
    static constexpr Area mm2(double v) { return Area(v * 1.0e6); }
    static constexpr Area cm2(double v) { return Area(v * 1.0e8); }
    static constexpr Area of(Length a, Length b) { return Area(a.in_um() * b.in_um()); }

    constexpr double in_um2() const { return um2_; }
    constexpr double in_mm2() const { return um2_ / 1.0e6; }

    constexpr auto operator<=>(const Area&) const = default;

private:
    constexpr explicit Area(double um2) : um2_(um2) {}
    double um2_ = 0.0;
};

namespace literals {
constexpr Length operator""_um(long double v) { return Length::um(static_cast<double>(v)); }
constexpr Length operator""_mm(long double v) { return Length::mm(static_cast<double>(v)); }
constexpr Length operator""_um(unsigned long long v) { return Length::um(static_cast<double>(v)); }
constexpr Length operator""_mm(unsigned long long v) { return Length::mm(static_cast<double>(v)); }
}  // namespace literals

}  // namespace mcam
