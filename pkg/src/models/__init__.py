"""
Domain types and SQLAlchemy ledger models.
"""
