import keras
from keras.models import Sequential
from keras.layers import Conv2D, LSTM, Dense

model = Sequential()
model.add(Conv2D(16, (3, 3), activation='relu', input_shape=(3, 64, 64)))
model.add(LSTM(32))
model.add(Dense(5, activation='softmax'))
