#pragma once

#include <array>
#include <complex>
#include <span>
#include <stdexcept>

namespace cqed {

using cplx = std::complex<double>;

/// Zero-third-cumulant closure:
/// <ABC> ~= <AB><C> + <AC><B> + <BC><A> - 2<A><B><C>.
inline cplx cumulant_close3(cplx a, cplx b, cplx c,
                            cplx ab, cplx ac, cplx bc) {
    return ab * c + ac * b + bc * a - 2.0 * a * b * c;
}

/// Zero-fourth-cumulant closure:
/// <ABCD> ~= sum of single*triple + pair*pair - 2 * pair*single*single + 6 <A><B><C><D>.
inline cplx cumulant_close4(cplx a, cplx b, cplx c, cplx d,
                            cplx ab, cplx ac, cplx ad, cplx bc, cplx bd, cplx cd,
                            cplx abc, cplx abd, cplx acd, cplx bcd) {
    return a * bcd + b * acd + c * abd + d * abc
         + ab * cd + ac * bd + ad * bc
         - 2.0 * (ab * c * d + ac * b * d + ad * b * c +
                  bc * a * d + bd * a * c + cd * a * b)
         + 6.0 * a * b * c * d;
}

// ---------------------------------------------------------------------------
// Exact two-level algebra for same-spin operator products.

enum class PauliOp { Z, Plus, Minus };

/// Linear combination c_id*1 + c_z*sz + c_p*s+ + c_m*s-.
struct PauliPoly {
    cplx c_id{0.0}, c_z{0.0}, c_p{0.0}, c_m{0.0};

    static PauliPoly identity() { return {1.0, 0.0, 0.0, 0.0}; }
    static PauliPoly basis(PauliOp op) {
        switch (op) {
            case PauliOp::Z: return {0.0, 1.0, 0.0, 0.0};
            case PauliOp::Plus: return {0.0, 0.0, 1.0, 0.0};
            default: return {0.0, 0.0, 0.0, 1.0};
        }
    }
};

/// Right-multiply a polynomial by a single Pauli operator using
/// sz*s- = -s-, sz*s+ = +s+, s+*s- = (1+sz)/2, s-*s+ = (1-sz)/2,
/// s+-*s+- = 0, sz*sz = 1.
inline PauliPoly multiply(const PauliPoly& p, PauliOp op) {
    PauliPoly r;
    switch (op) {
        case PauliOp::Z:
            r.c_id += p.c_z;   // sz*sz = 1
            r.c_z += p.c_id;   // 1*sz
            r.c_p -= p.c_p;    // s+*sz = -s+
            r.c_m += p.c_m;    // s-*sz = +s-
            break;
        case PauliOp::Plus:
            r.c_p += p.c_id + p.c_z;            // 1*s+, sz*s+ = +s+
            r.c_id += 0.5 * p.c_m;              // s-*s+ = (1-sz)/2
            r.c_z -= 0.5 * p.c_m;
            break;
        case PauliOp::Minus:
            r.c_m += p.c_id - p.c_z;            // 1*s-, sz*s- = -s-
            r.c_id += 0.5 * p.c_p;              // s+*s- = (1+sz)/2
            r.c_z += 0.5 * p.c_p;
            break;
    }
    return r;
}

/// Reduce an ordered product of same-spin Pauli operators.
inline PauliPoly pauli_reduce(std::span<const PauliOp> ops) {
    PauliPoly p = PauliPoly::identity();
    for (PauliOp op : ops) p = multiply(p, op);
    return p;
}

inline PauliPoly pauli_reduce(std::initializer_list<PauliOp> ops) {
    return pauli_reduce(std::span<const PauliOp>(ops.begin(), ops.size()));
}

}  // namespace cqed
