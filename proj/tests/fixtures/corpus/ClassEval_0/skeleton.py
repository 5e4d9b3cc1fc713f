class Calculator:
    """A small calculator that keeps a running total."""

    def __init__(self):
        self.total = 0

    def add(self, value):
        """Add value to the running total and return the new total.
        >>> Calculator().add(2)
        2
        """

    def divide(self, value):
        """Divide the running total by value and return it.
        Raises ZeroDivisionError when value is 0.
        """

    def reset(self):
        """Set the running total back to 0."""
