import fire

from ._workbench import Workbench


def main():
    fire.Fire(Workbench)


if __name__ == "__main__":
    main()
