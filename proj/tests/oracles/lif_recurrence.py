"""Step-by-step float32 evaluation of the LIF recurrence used to freeze test values."""
import numpy as np

f = np.float32


def run(beta, theta, currents, reset="subtract"):
    u, s = f(0), f(0)
    rows = []
    for i in currents:
        if reset == "subtract":
            u = f(f(f(beta) * u) + f(i)) - f(s * f(theta))
        else:
            u = f(f(0) if s else f(f(beta) * u)) + f(i)
        s = f(1) if u > f(theta) else f(0)
        rows.append((float(u), int(s)))
    return rows


if __name__ == "__main__":
    print("beta=0.5 theta=1 I=0.6:", run(0.5, 1.0, [0.6] * 6))
    print("beta=0 theta=1 I=2:", run(0.0, 1.0, [2.0] * 4))
    print("zero reset beta=0.5 theta=1 I=0.6:", run(0.5, 1.0, [0.6] * 6, "zero"))
    b = 0.9
    cur = [0.3, 0.1, 0.0, 0.7, 0.2]
    closed = [sum(b ** (t - k) * cur[k] for k in range(t + 1)) for t in range(len(cur))]
    print("closed form beta=0.9:", closed)
