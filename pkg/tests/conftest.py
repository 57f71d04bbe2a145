from hypothesis import HealthCheck, settings

# first calls compile numba kernels; per-example deadlines would flake on them
settings.register_profile("repo", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")
