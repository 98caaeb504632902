"""Exact-value engines for every sequence and series in the model.

Everything here is generic over the scalar kind: pass ``ctx=None`` for
exact rationals (gmpy2.mpq, literal-equality testable) or a
NumericContext for MPFR reals at a fixed precision.

Sequences and their defining relations:

    mu_n   = mu_{n-1} + sum_k pi_{n,k} mu_k          mu_0=0, mu_1=1
    pi_{n,k} = C(n-1,k) p^{n-1-k} q^k                (size-k subproblem)
    mu_n   = sum_k C(n,k) sum_{j<k} (-1)^j q^{(k-1-j)(k+j)/2}   (closed)
    mu_n   = n sum_{j<n} C(n-1,j) q^{C(j+1,2)}
               sum_{l<n-j} C(n-1-j,l) q^{jl} (1-q^j)^{n-1-j-l}/(j+l+1)
    J_n    = sum_{1<=j<=n} C(n,j) q^{j(j-1)/2};  Jbar_n = J_n + 1 obeys
             the mu recurrence with Jbar_0 = 1
    M_{n,m} central moments of Y_n via the Delta_{n,j} = mu_j + mu_{n-1}
             - mu_n correction sums
    nu_n   = nu_{n-1} + (1/n) sum_{j<n} nu_j         nu_0=0, nu_1=1
    zeta_m = (m - 1/m)^{-1} sum_{0<j<m} C(m,j) (zeta_j / j) zeta_{m-j}

The Poisson generating function of mu_n is evaluated directly from the
series e^{-x} sum mu_n x^n / n!, with derivative orders handled by
forward differences of the mu table; the modified Laplace transform is
summed from its iterated fixed-point form.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import gmpy2
import numpy as np
from gmpy2 import bincoef, mpfr, mpq

from .errors import DomainError, PrecisionInsufficient
from .numerics import (
    ModelParams,
    NumericContext,
    bits_of_agreement,
    required_precision,
    to_real,
)

__all__ = [
    "ENGINE_VERSION",
    "binomial_weights",
    "binomial_weights_float",
    "mu_recurrence",
    "mu_tilde_coeffs",
    "mu_closed_form",
    "mu_closed_form_table",
    "mu_positive_form",
    "delta_row",
    "J_direct",
    "jbar_recurrence",
    "central_moments",
    "nu_recurrence",
    "nu_times_factorial",
    "zeta_moments",
    "zeta_ode_residuals",
    "z_raw_moments",
    "poisson_max_n",
    "PoissonGF",
    "poisson_gf_eval",
    "laplace_star_eval",
    "laplace_star_residual",
    "euler_transform_partial",
    "MomentTable",
    "build_moment_table",
    "default_cache_dir",
]

ENGINE_VERSION = "0.1.0"

CACHE_ENV_VAR = "MISCOST_CACHE_DIR"


# ---------------------------------------------------------------------------
# binomial weight rows
# ---------------------------------------------------------------------------

def binomial_weights(n: int, params: ModelParams, ctx: Optional[NumericContext] = None):
    """Row pi_{n,k}, k = 0..n-1, by the overflow-free ratio recurrence

    pi_{n,0} = p^{n-1},  pi_{n,k+1} = pi_{n,k} * (n-1-k)/(k+1) * (q/p).
    """
    if n < 1:
        raise DomainError("weight rows start at n = 1")
    if ctx is None:
        p = params.p
        q = params.q
        row = [mpq(0)] * n
        row[0] = p ** (n - 1)
        ratio = q / p
        for k in range(n - 1):
            row[k + 1] = row[k] * (n - 1 - k) * ratio / (k + 1)
        return row
    with ctx.gmp():
        p = to_real(params.p, ctx)
        q = 1 - p
        ratio = q / p
        row = [mpfr(0)] * n
        row[0] = p ** (n - 1)
        for k in range(n - 1):
            row[k + 1] = row[k] * (n - 1 - k) * ratio / (k + 1)
        return row


def binomial_weights_float(n: int, params: ModelParams) -> np.ndarray:
    """Exact row converted to float64 (each entry correctly rounded)."""
    return np.array([float(w) for w in binomial_weights(n, params)], dtype=np.float64)


# ---------------------------------------------------------------------------
# mu: production recurrence and the two closed forms
# ---------------------------------------------------------------------------

def mu_recurrence(max_n: int, params: ModelParams, ctx: Optional[NumericContext] = None):
    """mu_0..mu_max_n by the O(max_n^2) recurrence (the production path)."""
    if max_n < 1:
        raise DomainError("max_n must be >= 1")

    def run(zero, one, p, q):
        ratio = q / p
        mu = [zero, one]
        for n in range(2, max_n + 1):
            pi = p ** (n - 1)
            acc = pi * mu[0]
            for k in range(n - 1):
                pi = pi * (n - 1 - k) * ratio / (k + 1)
                acc += pi * mu[k + 1]
            mu.append(mu[-1] + acc)
        return mu

    if ctx is None:
        return run(mpq(0), mpq(1), params.p, params.q)
    with ctx.gmp():
        p = to_real(params.p, ctx)
        return run(mpfr(0), mpfr(1), p, 1 - p)


class _QPowers:
    """Incrementally grown table of q^e used by the closed forms."""

    def __init__(self, q):
        self.q = q
        self.table = [q ** 0]

    def __getitem__(self, e: int):
        t = self.table
        while len(t) <= e:
            t.append(t[-1] * self.q)
        return t[e]


def mu_tilde_coeffs(max_n: int, params: ModelParams, ctx: Optional[NumericContext] = None):
    """Poisson-GF coefficients mu~_n = sum_{j<n} (-1)^j q^{(n-1-j)(n+j)/2}.

    Index 0 is 0; they also satisfy mu~_{n+1} = q^n mu~_n + (-1)^n.
    """
    def run(q, zero):
        qp = _QPowers(q)
        out = [zero]
        for n in range(1, max_n + 1):
            acc = zero
            for j in range(n):
                term = qp[(n - 1 - j) * (n + j) // 2]
                acc = acc + term if j % 2 == 0 else acc - term
            out.append(acc)
        return out

    if ctx is None:
        return run(params.q, mpq(0))
    with ctx.gmp():
        return run(to_real(params.q, ctx), to_real(0, ctx))


def mu_closed_form(
    n: int,
    params: ModelParams,
    ctx: Optional[NumericContext] = None,
    tilde=None,
):
    """mu_n from the alternating closed form (verification path).

    In real mode this suffers ~n bits of cancellation between the
    C(n,k)-sized terms, hence the required_precision(n) precondition.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if ctx is not None and ctx.precision_bits < required_precision(n):
        raise PrecisionInsufficient(
            f"closed form at n={n} needs >= {required_precision(n)} bits, "
            f"context has {ctx.precision_bits}"
        )
    if tilde is None:
        tilde = mu_tilde_coeffs(n, params, ctx)
    zero = mpq(0) if ctx is None else to_real(0, ctx)
    acc = zero
    if ctx is None:
        for k in range(1, n + 1):
            acc += bincoef(n, k) * tilde[k]
        return acc
    with ctx.gmp():
        for k in range(1, n + 1):
            acc += bincoef(n, k) * tilde[k]
        return acc


def mu_closed_form_table(max_n: int, params: ModelParams, ctx: Optional[NumericContext] = None):
    """mu_1..mu_max_n via the closed form, sharing one mu~ table."""
    tilde = mu_tilde_coeffs(max_n, params, ctx)
    return [None] + [
        mu_closed_form(n, params, ctx, tilde=tilde) for n in range(1, max_n + 1)
    ]


def mu_positive_form(n: int, params: ModelParams, ctx: Optional[NumericContext] = None):
    """mu_n from the all-positive double sum (verification path)."""
    if n < 1:
        raise DomainError("n must be >= 1")

    def run(q, one):
        qp = _QPowers(q)
        total = one - one
        for j in range(n):
            one_minus = one - qp[j]  # zero when j = 0; then only l = n-1-j survives
            inner = one - one
            # iterate l downward so (1-q^j)^(n-1-j-l) grows by one factor a step
            power = one
            for l in range(n - 1 - j, -1, -1):
                inner += bincoef(n - 1 - j, l) * qp[j * l] * power / (j + l + 1)
                power = power * one_minus
            total += bincoef(n - 1, j) * qp[j * (j + 1) // 2] * inner
        return n * total

    if ctx is None:
        return run(params.q, mpq(1))
    with ctx.gmp():
        return run(to_real(params.q, ctx), to_real(1, ctx))


def delta_row(n: int, mu):
    """Delta_{n,j} = mu_j + mu_{n-1} - mu_n for j = 0..n-1."""
    return [mu[j] + mu[n - 1] - mu[n] for j in range(n)]


# ---------------------------------------------------------------------------
# J_n: expected number of independent sets
# ---------------------------------------------------------------------------

def J_direct(n: int, params: ModelParams, ctx: Optional[NumericContext] = None):
    """J_n = sum_{1<=j<=n} C(n,j) q^{j(j-1)/2}."""
    if n < 1:
        raise DomainError("n must be >= 1")
    q = params.q if ctx is None else to_real(params.q, ctx)
    qp = _QPowers(q)

    def run():
        acc = qp[0] - qp[0]
        for j in range(1, n + 1):
            acc += bincoef(n, j) * qp[j * (j - 1) // 2]
        return acc

    if ctx is None:
        return run()
    with ctx.gmp():
        return run()


def jbar_recurrence(max_n: int, params: ModelParams, ctx: Optional[NumericContext] = None):
    """Jbar_0..Jbar_max_n from Jbar_n = Jbar_{n-1} + sum_k pi_{n,k} Jbar_k.

    Jbar_n = J_n + 1 satisfies the mu recurrence with Jbar_0 = 1, which
    is the identity the direct sum is checked against.
    """

    def run(one, p, q):
        ratio = q / p
        jbar = [one]
        for n in range(1, max_n + 1):
            pi = p ** (n - 1)
            acc = pi * jbar[0]
            for k in range(n - 1):
                pi = pi * (n - 1 - k) * ratio / (k + 1)
                acc += pi * jbar[k + 1]
            jbar.append(jbar[-1] + acc)
        return jbar

    if ctx is None:
        return run(mpq(1), params.p, params.q)
    with ctx.gmp():
        p = to_real(params.p, ctx)
        return run(to_real(1, ctx), p, 1 - p)


# ---------------------------------------------------------------------------
# central moments of Y_n
# ---------------------------------------------------------------------------

def central_moments(
    max_n: int,
    m_max: int,
    params: ModelParams,
    ctx: Optional[NumericContext] = None,
    progress=None,
):
    """Central moment table M_{n,m} of Y_n for m <= m_max, plus T_{n,2}.

    Returns (mu, M, T2) where M[n][m] = E(Y_n - mu_n)^m and T2[n] =
    sum_j pi_{n,j} Delta_{n,j}^2.  The toll term uses the vanishing of
    the k = 1 and k = m-1 multinomial groups (M_{n,1} = 0 and
    sum_j pi_{n,j} Delta_{n,j} = 0).
    """
    if m_max < 2:
        raise DomainError("m_max must be >= 2")

    def run(zero, one, p, q):
        ratio = q / p
        mu = [zero, one]
        M = [[one] + [zero] * m_max, [one] + [zero] * m_max]
        T2 = [zero, zero]
        comb = [[bincoef(m, l) for l in range(m + 1)] for m in range(m_max + 1)]
        for n in range(2, max_n + 1):
            pi = [zero] * n
            pi[0] = p ** (n - 1)
            for k in range(n - 1):
                pi[k + 1] = pi[k] * (n - 1 - k) * ratio / (k + 1)
            mu_n = mu[n - 1]
            acc = pi[0] * mu[0]
            for k in range(1, n):
                acc += pi[k] * mu[k]
            mu_n = mu_n + acc
            # S[l][h] = sum_j pi_j M_{j,l} Delta^h  for l + h <= m_max
            S = [[zero] * (m_max + 1) for _ in range(m_max + 1)]
            base = mu[n - 1] - mu_n
            for j in range(n):
                pj = pi[j]
                d = mu[j] + base
                Mj = M[j]
                power = pj
                for h in range(m_max + 1):
                    Sh_budget = m_max - h
                    for l in range(Sh_budget + 1):
                        S[l][h] += power * Mj[l]
                    if h < m_max:
                        power = power * d
            row = [one, zero] + [zero] * (m_max - 1)
            prev = M[n - 1]
            for m in range(2, m_max + 1):
                toll = zero
                cm = comb[m]
                for l in range(m):
                    toll += cm[l] * S[l][m - l]
                for k in range(2, m - 1):
                    inner = zero
                    cmk = comb[m - k]
                    for l in range(m - k + 1):
                        inner += cmk[l] * S[l][m - k - l]
                    toll += cm[k] * prev[k] * inner
                row[m] = prev[m] + S[m][0] + toll
            mu.append(mu_n)
            M.append(row)
            T2.append(S[0][2])
            if progress is not None and n % 250 == 0:
                progress(n)
        return mu, M, T2

    if ctx is None:
        return run(mpq(0), mpq(1), params.p, params.q)
    with ctx.gmp():
        p = to_real(params.p, ctx)
        return run(mpfr(0), mpfr(1), p, 1 - p)


# ---------------------------------------------------------------------------
# nu and zeta (uniform-split model)
# ---------------------------------------------------------------------------

def nu_recurrence(max_n: int, ctx: Optional[NumericContext] = None):
    """nu_0..nu_max_n from nu_n = nu_{n-1} + (1/n) sum_{j<n} nu_j."""
    if max_n < 1:
        raise DomainError("max_n must be >= 1")

    def run(zero, one):
        nu = [zero, one]
        prefix = zero + one
        for n in range(2, max_n + 1):
            v = nu[-1] + prefix / n
            nu.append(v)
            prefix += v
        return nu

    if ctx is None:
        return run(mpq(0), mpq(1))
    with ctx.gmp():
        return run(to_real(0, ctx), to_real(1, ctx))


def nu_times_factorial(max_n: int):
    """The integer sequence n! * nu_n (OEIS cross-check A005189 family).

    Raises DomainError if any entry fails to be integral.
    """
    nu = nu_recurrence(max_n)
    out = []
    fact = mpq(1)
    for n, v in enumerate(nu):
        if n > 0:
            fact *= n
        scaled = v * fact
        if scaled.denominator != 1:
            raise DomainError(f"n! * nu_n not integral at n={n}: {scaled}")
        out.append(int(scaled))
    return out


def zeta_moments(m_max: int):
    """Limit moments zeta_0..zeta_m_max of Z_n / E(Z_n), exact rationals."""
    if m_max < 1:
        raise DomainError("m_max must be >= 1")
    zeta = [mpq(1), mpq(1)]
    for m in range(2, m_max + 1):
        acc = mpq(0)
        for j in range(1, m):
            acc += bincoef(m, j) * zeta[j] / j * zeta[m - j]
        zeta.append(acc / (m - mpq(1, m)))
    return zeta


def zeta_ode_residuals(order: int):
    """Coefficient residuals of y^2 z'' + y z' - z = y z z' for the series
    z(y) = sum_{m>=1} zeta_m y^m / (m * m!).

    Residual at order m is (m^2-1) zeta_m / (m * m!) minus the
    convolution sum; all residuals are exactly zero when the zeta
    recurrence holds.
    """
    zeta = zeta_moments(order)
    residuals = []
    for m in range(2, order + 1):
        lhs = (mpq(m) * m - 1) * zeta[m] / (m * gmpy2.fac(m))
        rhs = mpq(0)
        for j in range(1, m):
            rhs += (zeta[j] / (j * gmpy2.fac(j))) * (zeta[m - j] / gmpy2.fac(m - j))
        residuals.append(lhs - rhs)
    return residuals


def z_raw_moments(max_n: int, m_max: int, ctx: Optional[NumericContext] = None):
    """Raw moments E[Z_n^m] for m <= m_max, n <= max_n.

    From the independence in the Z recurrence,
    E[Z_n^m] = sum_i C(m,i) E[Z_{n-1}^i] * (1/n) sum_{j<n} E[Z_j^{m-i}].
    Used to put finite-n Monte Carlo moments in context against the
    limit zeta_m.
    """

    def run(zero, one):
        A = [[one] + [zero] * m_max, [one] + [one] * m_max]
        prefix = [(A[0][m] + A[1][m]) for m in range(m_max + 1)]
        for n in range(2, max_n + 1):
            row = [one]
            for m in range(1, m_max + 1):
                acc = zero
                for i in range(m + 1):
                    mix = prefix[m - i] / n if m - i > 0 else one
                    acc += bincoef(m, i) * A[n - 1][i] * mix
                row.append(acc)
            A.append(row)
            for m in range(m_max + 1):
                prefix[m] += row[m]
        return A

    if ctx is None:
        return run(mpq(0), mpq(1))
    with ctx.gmp():
        return run(to_real(0, ctx), to_real(1, ctx))


# ---------------------------------------------------------------------------
# Poisson generating function of mu
# ---------------------------------------------------------------------------

def poisson_max_n(x: float) -> int:
    """Series length so the tail beyond it is far below the target scale."""
    return int(math.ceil(x + 40.0 * math.sqrt(max(x, 1.0)))) + 64


class PoissonGF:
    """Evaluator of the Poisson GF f~(x) = e^{-x} sum mu_n x^n / n!.

    Holds a mu table long and precise enough for points up to
    ``x_max``; derivative orders use forward differences of mu, since
    d^j/dx^j [e^{-x} sum mu_n x^n/n!] = e^{-x} sum (D^j mu)_n x^n/n!.
    """

    def __init__(
        self,
        params: ModelParams,
        x_max: float,
        ctx: Optional[NumericContext] = None,
        cache_dir=None,
        mu=None,
    ):
        self.params = params
        self.x_max = float(x_max)
        bits = required_precision(x_max)
        if ctx is None:
            ctx = NumericContext(precision_bits=max(bits, 256))
        elif ctx.precision_bits < bits:
            raise PrecisionInsufficient(
                f"Poisson evaluation up to x={x_max} needs >= {bits} bits, "
                f"context has {ctx.precision_bits}"
            )
        self.ctx = ctx
        self.cache_dir = cache_dir
        self.max_n = poisson_max_n(x_max)
        if mu is not None:
            if len(mu) < self.max_n + 1:
                raise DomainError("supplied mu table is too short")
            self.mu = mu
        else:
            table = build_moment_table(
                params,
                max_n=self.max_n,
                mode="real",
                ctx=ctx,
                components=("mu",),
                cache_dir=cache_dir,
            )
            self.mu = table.mu
        self._diffs = {0: self.mu}

    def _difference(self, order: int):
        diffs = self._diffs
        for j in range(1, order + 1):
            if j not in diffs:
                prev = diffs[j - 1]
                with self.ctx.gmp():
                    diffs[j] = [prev[i + 1] - prev[i] for i in range(len(prev) - 1)]
        return diffs[order]

    def eval(self, x, deriv_order: int = 0, check: bool = False):
        """f~^(j)(x) for real x in [0, x_max]."""
        if x < 0 or x > self.x_max:
            raise DomainError(f"x must lie in [0, {self.x_max}], got {x}")
        if deriv_order < 0:
            raise DomainError("derivative order must be >= 0")
        coeffs = self._difference(deriv_order)
        value = self._sum_series(coeffs, x, self.ctx)
        if check:
            dbl = self.ctx.doubled()
            table = build_moment_table(
                self.params,
                max_n=self.max_n,
                mode="real",
                ctx=dbl,
                components=("mu",),
                cache_dir=self.cache_dir,
            )
            again = PoissonGF(self.params, self.x_max, ctx=dbl, mu=table.mu)
            other = again._sum_series(again._difference(deriv_order), x, dbl)
            agree = bits_of_agreement(value, other)
            if agree < self.ctx.precision_bits - 16:
                raise PrecisionInsufficient(
                    f"f~^({deriv_order})({x}) agreed to only {agree:.0f} bits "
                    f"between {self.ctx.precision_bits} and doubled precision"
                )
        return value

    @staticmethod
    def _sum_series(coeffs, x, ctx):
        with ctx.gmp():
            X = to_real(x, ctx)
            term = gmpy2.exp(-X)
            total = mpfr(0)
            for n, c in enumerate(coeffs):
                total += term * c
                term = term * X / (n + 1)
            return total

    def functional_equation_residual(self, x):
        """|f~'(x) - f~(qx) - e^{-x}|, which is 0 for the true function."""
        with self.ctx.gmp():
            lhs = self.eval(x, 1)
            rhs = self.eval(float(self.params.q) * x, 0) + gmpy2.exp(-to_real(x, self.ctx))
            return abs(lhs - rhs)


def poisson_gf_eval(
    x,
    deriv_order: int,
    params: ModelParams,
    ctx: Optional[NumericContext] = None,
    cache_dir=None,
    check: bool = False,
):
    """One-shot f~^(j)(x); prefer a shared PoissonGF for repeated points."""
    gf = PoissonGF(params, x, ctx=ctx, cache_dir=cache_dir)
    return gf.eval(x, deriv_order, check=check)


# ---------------------------------------------------------------------------
# modified Laplace transform
# ---------------------------------------------------------------------------

def laplace_star_eval(s, params: ModelParams, ctx: NumericContext):
    """f~*(s) = sum_{j>=0} q^{j(j+1)/2} s^{j+1} / (1 + q^j s), Re(s) > 0.

    Terms decay like (qs)·q^{j(j-1)/2} so the sum is truncated once a
    term drops below series_epsilon relative to the partial sum.
    """
    is_complex = isinstance(s, complex) or isinstance(s, gmpy2.mpc)
    re = s.real if is_complex else s
    if not re > 0:
        raise DomainError(f"f~* requires Re(s) > 0, got {s}")
    with ctx.gmp():
        S = gmpy2.mpc(s) if is_complex else to_real(s, ctx)
        q = to_real(params.q, ctx)
        total = S - S
        qpow_tri = to_real(1, ctx)   # q^{j(j+1)/2}
        qpow_j = to_real(1, ctx)     # q^j
        spow = S                     # s^{j+1}
        j = 0
        while True:
            term = qpow_tri * spow / (1 + qpow_j * S)
            total += term
            scale = max(abs(total), to_real(1, ctx))
            if j > 4 and abs(term) < ctx.series_epsilon * scale:
                break
            j += 1
            qpow_j *= q
            qpow_tri *= qpow_j
            spow *= S
            if j > 100000:
                raise DomainError("f~* series failed to converge")
        return total


def laplace_star_residual(s, params: ModelParams, ctx: NumericContext):
    """|f~*(s) - s f~*(qs) - s/(1+s)|, ~0 for the true transform."""
    with ctx.gmp():
        S = to_real(s, ctx)
        q = to_real(params.q, ctx)
        lhs = laplace_star_eval(S, params, ctx)
        rhs = S * laplace_star_eval(q * S, params, ctx) + S / (1 + S)
        return abs(lhs - rhs)


def euler_transform_partial(s, params: ModelParams, ctx: NumericContext, terms: int, mu=None):
    """Partial sum of f~*(s) = (1+s)^{-1} sum mu_n (s/(1+s))^n."""
    if mu is None:
        mu = mu_recurrence(terms, params, ctx)
    with ctx.gmp():
        S = to_real(s, ctx)
        w = S / (1 + S)
        total = mpfr(0)
        wpow = to_real(1, ctx)
        for n in range(terms + 1):
            total += mu[n] * wpow
            wpow *= w
        return total / (1 + S)


# ---------------------------------------------------------------------------
# moment table container and cache
# ---------------------------------------------------------------------------

def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV_VAR)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "miscost"


@dataclass
class MomentTable:
    """Bundle of computed sequences with provenance for caching."""

    params: ModelParams
    mode: str                   # "exact" | "real"
    precision_bits: int
    max_n: int
    m_max: int = 0
    mu: list = field(default_factory=list)
    mu_tilde: list = field(default_factory=list)
    J: list = field(default_factory=list)
    central: list = field(default_factory=list)   # central[n][m]
    T2: list = field(default_factory=list)
    nu: list = field(default_factory=list)
    zeta: list = field(default_factory=list)

    @property
    def sigma2(self):
        """Variance row sigma_n^2 = M_{n,2}."""
        return [row[2] if row else None for row in self.central]

    def components(self):
        return tuple(
            name
            for name in ("mu", "mu_tilde", "J", "central", "nu", "zeta")
            if getattr(self, name)
        )

    # -- serialization ----------------------------------------------------

    def _scalar_to_str(self, v) -> str:
        if v is None:
            return ""
        if self.mode == "exact":
            r = mpq(v)
            return f"{r.numerator}/{r.denominator}"
        x = v if isinstance(v, mpfr) else mpfr(v, precision=self.precision_bits)
        if x == 0:
            return "0"
        # digits() round-trips exactly at >= prec*log10(2) + 2 digits
        ndigits = int(self.precision_bits * 0.30103) + 8
        mant, exp, _ = x.digits(10, ndigits)
        sign = "-" if mant.startswith("-") else ""
        return f"{sign}0.{mant.lstrip('-')}e{exp}"

    def _scalar_from_str(self, s: str):
        if s == "":
            return None
        if self.mode == "exact":
            num, den = s.split("/")
            return mpq(int(num), int(den))
        return mpfr(s, precision=self.precision_bits)

    def to_json(self) -> str:
        payload = {
            "version": ENGINE_VERSION,
            "p": self.params.label(),
            "mode": self.mode,
            "precision_bits": self.precision_bits,
            "max_n": self.max_n,
            "m_max": self.m_max,
        }
        for name in ("mu", "mu_tilde", "J", "nu", "zeta", "T2"):
            seq = getattr(self, name)
            if seq:
                payload[name] = [self._scalar_to_str(v) for v in seq]
        if self.central:
            payload["central"] = [
                [self._scalar_to_str(v) for v in row] for row in self.central
            ]
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "MomentTable":
        payload = json.loads(text)
        table = cls(
            params=ModelParams.from_string(payload["p"]),
            mode=payload["mode"],
            precision_bits=payload["precision_bits"],
            max_n=payload["max_n"],
            m_max=payload.get("m_max", 0),
        )
        for name in ("mu", "mu_tilde", "J", "nu", "zeta", "T2"):
            if name in payload:
                setattr(table, name, [table._scalar_from_str(s) for s in payload[name]])
        if "central" in payload:
            table.central = [
                [table._scalar_from_str(s) for s in row] for row in payload["central"]
            ]
        return table

    def cache_key(self, components) -> str:
        raw = "|".join(
            [
                ENGINE_VERSION,
                self.params.label(),
                self.mode,
                str(self.precision_bits),
                str(self.max_n),
                str(self.m_max),
                ",".join(sorted(components)),
            ]
        )
        return hashlib.sha256(raw.encode()).hexdigest()[:24]


def build_moment_table(
    params: ModelParams,
    max_n: int,
    mode: str = "exact",
    ctx: Optional[NumericContext] = None,
    m_max: int = 0,
    components=("mu",),
    cache_dir=None,
    progress=None,
) -> MomentTable:
    """Compute (or load from cache) the requested table components."""
    if mode not in ("exact", "real"):
        raise DomainError(f"mode must be 'exact' or 'real', got {mode!r}")
    if mode == "real" and ctx is None:
        ctx = NumericContext()
    run_ctx = None if mode == "exact" else ctx
    bits = 0 if mode == "exact" else ctx.precision_bits

    table = MomentTable(
        params=params, mode=mode, precision_bits=bits, max_n=max_n, m_max=m_max
    )
    key = table.cache_key(components)
    cache_path = None
    if cache_dir is not False:
        cache_root = Path(cache_dir) if cache_dir else default_cache_dir()
        cache_path = cache_root / f"table-{key}.json"
        if cache_path.exists():
            return MomentTable.from_json(cache_path.read_text())

    want = set(components)
    if "central" in want:
        mu, M, T2 = central_moments(max_n, m_max, params, run_ctx, progress=progress)
        table.mu = mu
        table.central = M
        table.T2 = T2
    elif "mu" in want:
        table.mu = mu_recurrence(max_n, params, run_ctx)
    if "mu_tilde" in want:
        table.mu_tilde = mu_tilde_coeffs(max_n, params, run_ctx)
    if "J" in want:
        table.J = [None] + [J_direct(n, params, run_ctx) for n in range(1, max_n + 1)]
    if "nu" in want:
        table.nu = nu_recurrence(max_n, run_ctx)
    if "zeta" in want:
        table.zeta = zeta_moments(max(m_max, 2))

    if cache_path is not None:
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        tmp = cache_path.with_suffix(".tmp")
        tmp.write_text(table.to_json())
        tmp.replace(cache_path)
    return table
