"""Pure-Python kernels. Same API as the compiled ``mab._kernels`` module."""

BACKEND = "python"


def powmod(base, exp, mod):
    # negative exponents go through the modular inverse (ValueError if none)
    return pow(base, exp, mod)


def powmod2(b1, e1, b2, e2, mod):
    return pow(b1, e1, mod) * pow(b2, e2, mod) % mod


def jacobi(a, n):
    a %= n
    result = 1
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def miller_rabin(n, bases):
    d = n - 1
    s = 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in bases:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def first_divisor(n, primes):
    for p in primes:
        if n % p == 0 and n != p:
            return p
    return 0


def residues(n, primes):
    return [n % p for p in primes]
