"""Generate integer q-expansion data files for the built-in cusp forms.

All four forms are eta products (one with an Eisenstein factor), so the
coefficients are integers computed by exact power-series arithmetic:

  gamma0_4 w6               eta(2z)^12 = sum c12(n) q^(2n+1),  q = e(z)
  once_punctured_torus w4   eta(z)^8:     support m = 2 mod 6 in q6
  once_punctured_torus w6a  eta(z)^4 E4:  support m = 1 mod 6 in q6
  once_punctured_torus w6b  eta(z)^12:    support m = 3 mod 6 in q6

where q6 = e(z/6) is the width-6 cusp parameter.

File format: a key-value header line, then "m re im" per nonzero
coefficient.  Run from the repository root.
"""

import os

TERMS = 135  # series order in q; torus files then reach m ~ 6*135


def eta_power(power, order):
    """Coefficients of prod_{n>=1} (1 - q^n)^power up to q^order."""
    euler = [0] * (order + 1)
    euler[0] = 1
    # pentagonal number theorem for a single Euler factor
    k = 1
    while True:
        for g in (k * (3 * k - 1) // 2, k * (3 * k + 1) // 2):
            if g > order:
                continue
            sign = -1 if k % 2 else 1
            euler[g] += sign
        if k * (3 * k - 1) // 2 > order:
            break
        k += 1
    out = [1] + [0] * order
    for _ in range(power):
        out = _mul(out, euler, order)
    return out


def _mul(a, b, order):
    out = [0] * (order + 1)
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j in range(min(order - i, len(b) - 1) + 1):
            if b[j]:
                out[i + j] += ai * b[j]
    return out


def sigma3(n):
    return sum(d ** 3 for d in range(1, n + 1) if n % d == 0)


def eisenstein4(order):
    return [1] + [240 * sigma3(n) for n in range(1, order + 1)]


def write_qexp(path, header, pairs):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for m, c in pairs:
            if c != 0:
                fh.write(f"{m} {c} 0\n")
    print(f"{os.path.basename(path)}: {sum(1 for _, c in pairs if c)} nonzero terms, top m {max(m for m, c in pairs if c)}")


def main():
    dest = os.path.join(os.path.dirname(__file__), "..", "src", "operlab", "data")
    os.makedirs(dest, exist_ok=True)

    # eta(2z)^12 = q prod (1 - q^(2n))^12: odd support in q
    c12 = eta_power(12, TERMS)
    pairs = [(2 * n + 1, c12[n]) for n in range(TERMS + 1)]
    write_qexp(
        os.path.join(dest, "gamma0_4_w6.qexp"),
        "weight 6 width 1 level gamma0_4 tag w6",
        pairs,
    )

    # eta^8 = q^(1/3) prod (1-q^n)^8: support 6n+2 in q6
    c8 = eta_power(8, TERMS)
    pairs = [(6 * n + 2, c8[n]) for n in range(TERMS + 1)]
    write_qexp(
        os.path.join(dest, "once_punctured_torus_w4.qexp"),
        "weight 4 width 6 level once_punctured_torus tag w4",
        pairs,
    )

    # eta^4 E4 = q^(1/6) (prod (1-q^n)^4) E4: support 6n+1
    c4 = eta_power(4, TERMS)
    e4 = eisenstein4(TERMS)
    prod = _mul(c4, e4, TERMS)
    pairs = [(6 * n + 1, prod[n]) for n in range(TERMS + 1)]
    write_qexp(
        os.path.join(dest, "once_punctured_torus_w6a.qexp"),
        "weight 6 width 6 level once_punctured_torus tag w6a",
        pairs,
    )

    # eta^12 = q^(1/2) prod (1-q^n)^12: support 6n+3
    pairs = [(6 * n + 3, c12[n]) for n in range(TERMS + 1)]
    write_qexp(
        os.path.join(dest, "once_punctured_torus_w6b.qexp"),
        "weight 6 width 6 level once_punctured_torus tag w6b",
        pairs,
    )


if __name__ == "__main__":
    main()
