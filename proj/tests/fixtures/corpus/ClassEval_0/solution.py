class Calculator:
    """A small calculator that keeps a running total."""

    def __init__(self):
        self.total = 0

    def add(self, value):
        self.total += value
        return self.total

    def divide(self, value):
        self.total = self.total / value
        return self.total

    def reset(self):
        self.total = 0
