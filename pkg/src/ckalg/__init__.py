"""Cuntz-Krieger algebras of subshifts of finite type: groupoid arithmetic,
truncated operator models, spectral triples and K-theory bookkeeping."""

__version__ = "0.1.0"
