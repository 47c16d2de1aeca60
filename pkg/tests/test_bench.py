from oem_sync.bench import format_benchmark, run_benchmark


def test_benchmark_compares_backends():
    result = run_benchmark(n_mech=3, n_cav=3, t_max=3.0, seed=5)
    assert "numpy" in result.seconds
    assert "numba" in result.seconds
    assert result.max_deviation is not None and result.max_deviation < 1e-7
    assert result.speedup is not None and result.speedup > 0

    text = format_benchmark(result)
    assert "benchmark:" in text
    assert "speedup" in text
    assert "deviation" in text
