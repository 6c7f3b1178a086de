from src.orbibundle.application.cli import main

if __name__ == "__main__":
    main()
