#!/usr/bin/env python3
"""Protocol server replying with the first coordinate of each row."""
import sys


def main():
    while True:
        header = sys.stdin.readline()
        if not header:
            return 0
        batch_size, _ = header.split()
        values = []
        for _ in range(int(batch_size)):
            line = sys.stdin.readline()
            values.append(line.strip().split(",")[0])
        for value in values:
            sys.stdout.write(value + "\n")
        sys.stdout.flush()


if __name__ == "__main__":
    sys.exit(main())
