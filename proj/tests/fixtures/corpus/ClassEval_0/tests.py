import unittest

from candidate import Calculator


class CalculatorTestAdd(unittest.TestCase):
    def test_add_1(self):
        self.assertEqual(Calculator().add(2), 2)

    def test_add_2(self):
        calc = Calculator()
        calc.add(2)
        self.assertEqual(calc.add(3), 5)


class CalculatorTestDivide(unittest.TestCase):
    def test_divide_1(self):
        calc = Calculator()
        calc.add(9)
        self.assertEqual(calc.divide(3), 3)

    def test_divide_2(self):
        with self.assertRaises(ZeroDivisionError):
            Calculator().divide(0)


class CalculatorTestReset(unittest.TestCase):
    def test_reset_1(self):
        calc = Calculator()
        calc.add(4)
        calc.reset()
        self.assertEqual(calc.total, 0)


class CalculatorTestMain(unittest.TestCase):
    def test_main(self):
        calc = Calculator()
        calc.add(10)
        calc.divide(4)
        self.assertEqual(calc.total, 2.5)
