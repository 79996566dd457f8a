from ainsim.rng import Xoshiro256, splitmix64


def test_splitmix64_reference_output():
    # published first output of splitmix64 from state 0
    _, out = splitmix64(0)
    assert out == 0xE220A8397B1DCDAF


def test_xoshiro_known_state_sequence():
    g = Xoshiro256(0)
    g._s = [1, 2, 3, 4]
    # hand-evaluated: rotl(2 * 5, 7) * 9 = 11520, then s[1] becomes 0
    assert g.next_u64() == 11520
    assert g.next_u64() == 0


def test_floats_in_unit_interval_and_deterministic():
    a = Xoshiro256(99)
    b = Xoshiro256(99)
    xs = [a.random() for _ in range(1000)]
    assert xs == [b.random() for _ in range(1000)]
    assert all(0.0 <= x < 1.0 for x in xs)
    assert abs(sum(xs) / len(xs) - 0.5) < 0.05


def test_different_seeds_differ():
    assert Xoshiro256(1).next_u64() != Xoshiro256(2).next_u64()
