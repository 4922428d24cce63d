"""
Allow running as: python -m lazytime
"""

from .main import main

if __name__ == "__main__":
    main()
